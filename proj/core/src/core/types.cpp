#include "anchor/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "anchor/core/errors.hpp"

namespace anchor::core {
namespace {

// Slack for values produced by the linear maps (x/5, x*(pi/2)).
constexpr double kRangeSlack = 1e-9;

std::string component_name(std::size_t i) {
  if (i < kNumAU) return std::string(kAUNames[i]);
  return std::string(kPoseNames[i - kNumAU]);
}

void check_range(double v, double lo, double hi, std::size_t i, const char* units) {
  if (!std::isfinite(v) || v < lo - kRangeSlack || v > hi + kRangeSlack) {
    std::ostringstream os;
    os << "component " << i << " (" << component_name(i) << ") = " << v
       << " outside " << units << " range [" << lo << ", " << hi << "]";
    throw RangeError(i, os.str());
  }
}

}  // namespace

AUPSVector AUPSVector::from_flat(std::span<const double> values, bool normalized) {
  if (values.size() != kAUPSDim) {
    throw ShapeError("AU+PS vector needs " + std::to_string(kAUPSDim) + " values, got " +
                     std::to_string(values.size()));
  }
  AUPSVector v;
  v.normalized = normalized;
  std::copy_n(values.begin(), kNumAU, v.au.begin());
  std::copy_n(values.begin() + kNumAU, kNumPose, v.pose.begin());
  v.validate();
  return v;
}

std::array<double, kAUPSDim> AUPSVector::flat() const {
  std::array<double, kAUPSDim> out{};
  std::copy(au.begin(), au.end(), out.begin());
  std::copy(pose.begin(), pose.end(), out.begin() + kNumAU);
  return out;
}

void AUPSVector::validate() const {
  const double au_hi = normalized ? 1.0 : kMaxAUIntensity;
  const double pose_hi = normalized ? 1.0 : kMaxPoseRadians;
  const char* units = normalized ? "normalized" : "raw";
  for (std::size_t i = 0; i < kNumAU; ++i) check_range(au[i], 0.0, au_hi, i, units);
  for (std::size_t i = 0; i < kNumPose; ++i) {
    check_range(pose[i], -pose_hi, pose_hi, kNumAU + i, units);
  }
}

void LandmarkSet::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
      std::ostringstream os;
      os << "landmark " << i << " = (" << p.x << ", " << p.y << ") outside [0,1]^2";
      throw RangeError(i, os.str());
    }
  }
}

FrameImage::FrameImage(int height, int width, float fill)
    : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw ShapeError("frame dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(3) * height * width, fill);
}

FrameImage::FrameImage(int height, int width, std::vector<float> planar)
    : height_(height), width_(width), pixels_(std::move(planar)) {
  if (height <= 0 || width <= 0) throw ShapeError("frame dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(3) * height * width) {
    throw ShapeError("frame buffer holds " + std::to_string(pixels_.size()) +
                     " values, expected 3x" + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

void FrameImage::validate() const {
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    const float v = pixels_[i];
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw RangeError(i, "pixel " + std::to_string(i) + " = " + std::to_string(v) +
                              " outside [-1, 1]");
    }
  }
}

void SampleRecord::validate(bool require_frames) const {
  if (aups_seq.empty()) throw EmptyInputError("sample '" + id + "' has no frames");
  if ((require_frames || !frames.empty()) && frames.size() != aups_seq.size()) {
    throw ShapeError("sample '" + id + "' has " + std::to_string(aups_seq.size()) +
                     " AU+PS rows but " + std::to_string(frames.size()) + " frames");
  }
}

AUPSVector normalize_aups(const AUPSVector& raw) {
  if (raw.normalized) throw ContractError("normalize_aups expects raw units");
  raw.validate();
  AUPSVector out;
  out.normalized = true;
  for (std::size_t i = 0; i < kNumAU; ++i) out.au[i] = raw.au[i] / kMaxAUIntensity;
  for (std::size_t i = 0; i < kNumPose; ++i) out.pose[i] = raw.pose[i] / kMaxPoseRadians;
  return out;
}

AUPSVector denormalize_aups(const AUPSVector& normalized) {
  if (!normalized.normalized) throw ContractError("denormalize_aups expects normalized units");
  normalized.validate();
  AUPSVector out;
  out.normalized = false;
  for (std::size_t i = 0; i < kNumAU; ++i) out.au[i] = normalized.au[i] * kMaxAUIntensity;
  for (std::size_t i = 0; i < kNumPose; ++i) {
    out.pose[i] = normalized.pose[i] * kMaxPoseRadians;
  }
  return out;
}

LandmarkSet average_landmarks(std::span<const LandmarkSet> sets) {
  if (sets.empty()) throw EmptyInputError("average_landmarks needs at least one set");
  const std::size_t count = sets.front().size();
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (sets[s].size() != count) {
      throw ShapeError("landmark set " + std::to_string(s) + " has " +
                       std::to_string(sets[s].size()) + " points, expected " +
                       std::to_string(count));
    }
  }

  std::vector<double> column(sets.size());
  auto sorted_mean = [&column] {
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    return sum / static_cast<double>(column.size());
  };

  LandmarkSet out;
  out.points.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t s = 0; s < sets.size(); ++s) column[s] = sets[s].points[k].x;
    out.points[k].x = std::clamp(sorted_mean(), 0.0, 1.0);
    for (std::size_t s = 0; s < sets.size(); ++s) column[s] = sets[s].points[k].y;
    out.points[k].y = std::clamp(sorted_mean(), 0.0, 1.0);
  }
  return out;
}

}  // namespace anchor::core
