#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anchor/nn/adam.hpp"
#include "anchor/nn/parameter.hpp"

namespace anchor::train {

struct NamedTensor {
  std::string name;
  nn::Shape shape;
  std::vector<float> data;

  bool operator==(const NamedTensor&) const = default;
};

// Container layout (all integers little-endian):
//   "ANCH" | u32 version = 1 | u32 tensor count
//   per tensor: u16 name length | name | u8 rank | u32 dims[rank] | f32 payload
//   u32 config length | config JSON
struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::string config_json;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& at(const std::string& name) const;  // FormatError if absent
  void put(NamedTensor t);                                // replaces same-named entry

  // 64-bit metadata stored bit-exactly as two float-typed words.
  void put_u64(const std::string& name, std::uint64_t value);
  std::uint64_t get_u64(const std::string& name) const;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Validates everything before returning; a bad file never yields partial state.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& bytes);
std::string serialize_checkpoint(const Checkpoint& ckpt);

// 12 + sum(2 + |name| + 1 + 4 * rank + 4 * numel) + 4 + |config|.
std::size_t checkpoint_size(const Checkpoint& ckpt);

// ParamStore <-> tensors under a name prefix ("seq2au/", "g/", ...).
void store_params(Checkpoint& ckpt, const std::string& prefix, const nn::ParamStore<float>& ps);
void restore_params(const Checkpoint& ckpt, const std::string& prefix, nn::ParamStore<float>& ps);

void store_adam(Checkpoint& ckpt, const std::string& prefix, const nn::ParamStore<float>& ps,
                const nn::Adam<float>& opt);
void restore_adam(const Checkpoint& ckpt, const std::string& prefix,
                  const nn::ParamStore<float>& ps, nn::Adam<float>& opt);

}  // namespace anchor::train
