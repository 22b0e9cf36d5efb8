#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anchor/core/config.hpp"
#include "anchor/core/types.hpp"
#include "anchor/nn/tensor.hpp"

namespace anchor::cond {

struct ChannelGroup {
  std::string name;  // "aups_t-2", "aups_t", "flm", "frame_t-1", ...
  int offset = 0;
  int count = 0;
};

// Generator input: a (C, H, W) tensor plus the ordered channel groups that
// make it up.
struct ConditioningStack {
  nn::Tensor<float> channels;
  std::vector<ChannelGroup> layout;

  int num_channels() const { return channels.rank() == 3 ? channels.dim(0) : 0; }
  int height() const { return channels.dim(1); }
  int width() const { return channels.dim(2); }
  const ChannelGroup& group(std::string_view name) const;
  nn::Tensor<float> extract(std::string_view name) const;  // (count, H, W)
};

// 20(n+1) AU+PS channels, one heatmap (or n+1 with repeat_flm), 3n frame channels.
int stack_channels(int n_prior, bool repeat_flm = false);

// 20 spatially constant channels, channel k = v[k]. v must be normalized.
nn::Tensor<float> broadcast_aups(const core::AUPSVector& v, int height, int width);

// One channel: max over landmarks of exp(-d^2 / (2 sigma^2)), where d is the
// pixel distance to the pixel that contains the landmark.
nn::Tensor<float> splat_landmarks(const core::LandmarkSet& flm, int height, int width,
                                  double sigma_px);

// Channel order: AU+PS t-n .. t-1, AU+PS t, heatmap, frame t-n .. t-1.
// `priors` and `prior_frames` are oldest first and must both hold n_prior
// items; use zero_prior()/zero_frame() for positions before the sequence start.
ConditioningStack assemble_stack(const core::AUPSVector& current,
                                 std::span<const core::AUPSVector> priors,
                                 const nn::Tensor<float>& heatmap,
                                 std::span<const core::FrameImage> prior_frames,
                                 const core::PipelineConfig& config);
ConditioningStack assemble_stack(const core::AUPSVector& current,
                                 std::span<const core::AUPSVector> priors,
                                 const core::LandmarkSet& avg_flm,
                                 std::span<const core::FrameImage> prior_frames,
                                 const core::PipelineConfig& config);

// Window ending at frame t of a sequence, zero-padded at the start.
struct Window {
  std::vector<core::AUPSVector> priors;
  std::vector<core::FrameImage> prior_frames;
};
Window window_at(std::span<const core::AUPSVector> aups, std::span<const core::FrameImage> frames,
                 std::size_t t, int n_prior, int height, int width);

}  // namespace anchor::cond
