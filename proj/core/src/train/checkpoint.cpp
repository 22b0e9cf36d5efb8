#include "anchor/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "anchor/core/errors.hpp"

namespace anchor::train {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename U>
void put_raw(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_floats(float* dst, std::size_t n, const char* what) {
    need(n * 4, what);
    std::memcpy(dst, bytes_.data() + pos_, n * 4);
    pos_ += n * 4;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& Checkpoint::at(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (!t) throw FormatError("checkpoint has no tensor '" + name + "'");
  return *t;
}

void Checkpoint::put(NamedTensor t) {
  for (auto& existing : tensors) {
    if (existing.name == t.name) {
      existing = std::move(t);
      return;
    }
  }
  tensors.push_back(std::move(t));
}

void Checkpoint::put_u64(const std::string& name, std::uint64_t value) {
  const auto lo = static_cast<std::uint32_t>(value);
  const auto hi = static_cast<std::uint32_t>(value >> 32);
  put({name, {2}, {std::bit_cast<float>(lo), std::bit_cast<float>(hi)}});
}

std::uint64_t Checkpoint::get_u64(const std::string& name) const {
  const NamedTensor& t = at(name);
  if (t.data.size() != 2) throw FormatError("metadata tensor '" + name + "' must hold 2 words");
  return static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(t.data[0])) |
         (static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(t.data[1])) << 32);
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = "ANCH";
  put_raw<std::uint32_t>(out, kCheckpointVersion);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xFFFF) throw ShapeError("tensor name too long: " + t.name.substr(0, 40));
    if (t.shape.size() > 0xFF) throw ShapeError("tensor rank too large: " + t.name);
    if (nn::shape_numel(t.shape) != t.data.size()) {
      throw ShapeError("tensor '" + t.name + "' has " + std::to_string(t.data.size()) +
                       " values for shape " + nn::shape_string(t.shape));
    }
    put_raw<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * 4);
  }
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config_json.size()));
  out += ckpt.config_json;
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_string(4, "magic") != "ANCH") throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  // Smallest possible record is 3 bytes; reject counts the file cannot hold.
  if (static_cast<std::size_t>(count) * 3 > r.remaining()) {
    throw FormatError("checkpoint tensor count " + std::to_string(count) + " exceeds file size");
  }
  Checkpoint ckpt;
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string(r.get<std::uint16_t>("name length"), "name");
    const auto rank = r.get<std::uint8_t>("rank");
    std::size_t numel = 1;
    for (int k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint32_t>("dims");
      if (d > 0x7FFFFFFF) throw FormatError("tensor '" + t.name + "' has an invalid dimension");
      t.shape.push_back(static_cast<int>(d));
      numel *= d;
      if (numel * 4 > r.remaining()) {
        throw FormatError("checkpoint truncated in tensor '" + t.name + "'");
      }
    }
    t.data.resize(numel);
    r.get_floats(t.data.data(), numel, "payload");
    ckpt.tensors.push_back(std::move(t));
  }
  ckpt.config_json = r.get_string(r.get<std::uint32_t>("config length"), "config");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint config");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  // Write then rename so readers never see a half-written file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_checkpoint(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::size_t checkpoint_size(const Checkpoint& ckpt) {
  std::size_t n = 12;
  for (const auto& t : ckpt.tensors) n += 2 + t.name.size() + 1 + 4 * t.shape.size() + 4 * t.data.size();
  return n + 4 + ckpt.config_json.size();
}

void store_params(Checkpoint& ckpt, const std::string& prefix, const nn::ParamStore<float>& ps) {
  for (const auto& p : ps) ckpt.put({prefix + p.name, p.value.shape(), p.value.storage()});
}

void restore_params(const Checkpoint& ckpt, const std::string& prefix,
                    nn::ParamStore<float>& ps) {
  for (auto& p : ps) {
    const NamedTensor& t = ckpt.at(prefix + p.name);
    if (t.shape != p.value.shape()) {
      throw FormatError("checkpoint tensor '" + t.name + "' has shape " + nn::shape_string(t.shape) +
                        ", model expects " + nn::shape_string(p.value.shape()));
    }
    p.value.storage() = t.data;
  }
}

void store_adam(Checkpoint& ckpt, const std::string& prefix, const nn::ParamStore<float>& ps,
                const nn::Adam<float>& opt) {
  std::size_t i = 0;
  for (const auto& p : ps) {
    ckpt.put({prefix + "m/" + p.name, p.value.shape(), opt.first_moments()[i].storage()});
    ckpt.put({prefix + "v/" + p.name, p.value.shape(), opt.second_moments()[i].storage()});
    ++i;
  }
  ckpt.put_u64(prefix + "steps", static_cast<std::uint64_t>(opt.steps()));
}

void restore_adam(const Checkpoint& ckpt, const std::string& prefix,
                  const nn::ParamStore<float>& ps, nn::Adam<float>& opt) {
  std::size_t i = 0;
  for (const auto& p : ps) {
    const auto& m = ckpt.at(prefix + "m/" + p.name);
    const auto& v = ckpt.at(prefix + "v/" + p.name);
    if (m.shape != p.value.shape() || v.shape != p.value.shape()) {
      throw FormatError("optimizer state for '" + p.name + "' has the wrong shape");
    }
    opt.first_moments()[i].storage() = m.data;
    opt.second_moments()[i].storage() = v.data;
    ++i;
  }
  opt.set_steps(static_cast<std::int64_t>(ckpt.get_u64(prefix + "steps")));
}

}  // namespace anchor::train
