#include "anchor/cond/stack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "anchor/core/errors.hpp"

namespace anchor::cond {
namespace {

std::string offset_name(const char* base, int back) {
  return std::string(base) + (back == 0 ? "_t" : "_t-" + std::to_string(back));
}

}  // namespace

const ChannelGroup& ConditioningStack::group(std::string_view name) const {
  for (const auto& g : layout) {
    if (g.name == name) return g;
  }
  throw ShapeError("conditioning stack has no channel group '" + std::string(name) + "'");
}

nn::Tensor<float> ConditioningStack::extract(std::string_view name) const {
  const ChannelGroup& g = group(name);
  const std::size_t plane = static_cast<std::size_t>(height()) * width();
  const auto first = channels.storage().begin() + static_cast<std::ptrdiff_t>(g.offset * plane);
  return nn::Tensor<float>({g.count, height(), width()},
                           std::vector<float>(first, first + static_cast<std::ptrdiff_t>(g.count * plane)));
}

int stack_channels(int n_prior, bool repeat_flm) {
  if (n_prior < 0) throw ConfigError("n_prior must be >= 0");
  const int heatmaps = repeat_flm ? n_prior + 1 : 1;
  return static_cast<int>(core::kAUPSDim) * (n_prior + 1) + heatmaps + 3 * n_prior;
}

nn::Tensor<float> broadcast_aups(const core::AUPSVector& v, int height, int width) {
  if (!v.normalized) throw ContractError("broadcast_aups expects a normalized AU+PS vector");
  v.validate();
  const int d = static_cast<int>(core::kAUPSDim);
  nn::Tensor<float> out({d, height, width});
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int k = 0; k < d; ++k) {
    std::fill_n(out.data() + k * plane, plane, static_cast<float>(v[static_cast<std::size_t>(k)]));
  }
  return out;
}

nn::Tensor<float> splat_landmarks(const core::LandmarkSet& flm, int height, int width,
                                  double sigma_px) {
  if (height < 1 || width < 1) throw ShapeError("splat_landmarks needs a positive image size");
  if (!(sigma_px > 0)) throw ConfigError("landmark sigma must be positive");
  flm.validate();
  nn::Tensor<float> out({1, height, width});
  std::vector<double> best(static_cast<std::size_t>(height) * width, 0.0);
  const double inv = 1.0 / (2.0 * sigma_px * sigma_px);
  for (const auto& p : flm.points) {
    const int cx = std::min(static_cast<int>(p.x * width), width - 1);
    const int cy = std::min(static_cast<int>(p.y * height), height - 1);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double d2 = double(x - cx) * (x - cx) + double(y - cy) * (y - cy);
        double& b = best[static_cast<std::size_t>(y) * width + x];
        b = std::max(b, std::exp(-d2 * inv));
      }
    }
  }
  // Far pixels may underflow to 0 in float; keep the channel strictly positive.
  for (std::size_t i = 0; i < best.size(); ++i) {
    out[i] = std::max(static_cast<float>(best[i]), std::numeric_limits<float>::min());
  }
  return out;
}

ConditioningStack assemble_stack(const core::AUPSVector& current,
                                 std::span<const core::AUPSVector> priors,
                                 const nn::Tensor<float>& heatmap,
                                 std::span<const core::FrameImage> prior_frames,
                                 const core::PipelineConfig& config) {
  const int n = config.n_prior;
  const int h = config.image_h, w = config.image_w;
  if (static_cast<int>(priors.size()) != n || static_cast<int>(prior_frames.size()) != n) {
    throw ShapeError("conditioning window needs " + std::to_string(n) + " priors and frames, got " +
                     std::to_string(priors.size()) + " and " + std::to_string(prior_frames.size()));
  }
  if (heatmap.shape() != nn::Shape{1, h, w}) {
    throw ShapeError("heatmap shape " + nn::shape_string(heatmap.shape()) + " does not match image");
  }

  ConditioningStack s;
  s.channels = nn::Tensor<float>({stack_channels(n, config.repeat_flm), h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  int offset = 0;
  auto put = [&](std::string name, const float* src, int count) {
    std::copy_n(src, count * plane, s.channels.data() + offset * plane);
    s.layout.push_back({std::move(name), offset, count});
    offset += count;
  };

  const int d = static_cast<int>(core::kAUPSDim);
  for (int i = 0; i < n; ++i) {
    put(offset_name("aups", n - i), broadcast_aups(priors[i], h, w).data(), d);
  }
  put("aups_t", broadcast_aups(current, h, w).data(), d);
  if (config.repeat_flm) {
    for (int back = n; back >= 0; --back) put(offset_name("flm", back), heatmap.data(), 1);
  } else {
    put("flm", heatmap.data(), 1);
  }
  for (int i = 0; i < n; ++i) {
    const auto& f = prior_frames[i];
    if (f.height() != h || f.width() != w) {
      throw ShapeError("prior frame " + std::to_string(i) + " has the wrong size");
    }
    put(offset_name("frame", n - i), f.pixels().data(), 3);
  }
  return s;
}

ConditioningStack assemble_stack(const core::AUPSVector& current,
                                 std::span<const core::AUPSVector> priors,
                                 const core::LandmarkSet& avg_flm,
                                 std::span<const core::FrameImage> prior_frames,
                                 const core::PipelineConfig& config) {
  return assemble_stack(current, priors,
                        splat_landmarks(avg_flm, config.image_h, config.image_w,
                                        config.landmark_sigma_px),
                        prior_frames, config);
}

Window window_at(std::span<const core::AUPSVector> aups, std::span<const core::FrameImage> frames,
                 std::size_t t, int n_prior, int height, int width) {
  if (t >= aups.size()) throw ShapeError("window index past the end of the sequence");
  Window win;
  for (int back = n_prior; back >= 1; --back) {
    const auto i = static_cast<std::ptrdiff_t>(t) - back;
    if (i < 0) {
      win.priors.push_back(core::AUPSVector::zeros(true));
      win.prior_frames.emplace_back(height, width, 0.0f);
    } else {
      win.priors.push_back(aups[static_cast<std::size_t>(i)]);
      if (static_cast<std::size_t>(i) >= frames.size()) {
        throw ShapeError("window needs frame " + std::to_string(i) + " which is not available");
      }
      win.prior_frames.push_back(frames[static_cast<std::size_t>(i)]);
    }
  }
  return win;
}

}  // namespace anchor::cond
