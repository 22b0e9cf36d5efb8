#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anchor::core {

inline constexpr std::size_t kNumAU = 17;
inline constexpr std::size_t kNumPose = 3;
inline constexpr std::size_t kAUPSDim = kNumAU + kNumPose;

inline constexpr double kMaxAUIntensity = 5.0;
inline constexpr double kMaxPoseRadians = std::numbers::pi / 2.0;

// The 17 intensity action units reported by OpenFace, in column order.
inline constexpr std::array<std::string_view, kNumAU> kAUNames = {
    "au01", "au02", "au04", "au05", "au06", "au07", "au09", "au10", "au12",
    "au14", "au15", "au17", "au20", "au23", "au25", "au26", "au45"};
inline constexpr std::array<std::string_view, kNumPose> kPoseNames = {"pitch", "yaw",
                                                                      "roll"};

// Indices into AUPSVector::au for the units the renderer animates.
namespace au {
inline constexpr std::size_t kInnerBrowRaiser = 0;  // AU01
inline constexpr std::size_t kOuterBrowRaiser = 1;  // AU02
inline constexpr std::size_t kBrowLowerer = 2;      // AU04
inline constexpr std::size_t kLipCornerPuller = 8;  // AU12
inline constexpr std::size_t kLipStretcher = 12;    // AU20
inline constexpr std::size_t kLipsPart = 14;        // AU25
inline constexpr std::size_t kJawDrop = 15;         // AU26
inline constexpr std::size_t kBlink = 16;           // AU45
}  // namespace au

namespace pose {
inline constexpr std::size_t kPitch = 0;
inline constexpr std::size_t kYaw = 1;
inline constexpr std::size_t kRoll = 2;
}  // namespace pose

// 17 action-unit intensities followed by (pitch, yaw, roll).
//
// Raw units: au in [0, 5], pose in radians within [-pi/2, pi/2].
// Normalized units: au in [0, 1], pose in [-1, 1].
struct AUPSVector {
  std::array<double, kNumAU> au{};
  std::array<double, kNumPose> pose{};
  bool normalized = false;

  static AUPSVector zeros(bool normalized) {
    AUPSVector v;
    v.normalized = normalized;
    return v;
  }

  // Builds from a 20-element flat view and validates the ranges.
  static AUPSVector from_flat(std::span<const double> values, bool normalized);

  std::array<double, kAUPSDim> flat() const;
  double operator[](std::size_t i) const { return i < kNumAU ? au[i] : pose[i - kNumAU]; }

  // Throws RangeError naming the first offending component.
  void validate() const;

  bool operator==(const AUPSVector&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// Facial landmarks in normalized image coordinates, [0,1]^2.
struct LandmarkSet {
  std::vector<Point2> points;

  std::size_t size() const { return points.size(); }
  void validate() const;
  bool operator==(const LandmarkSet&) const = default;
};

inline constexpr std::size_t kDefaultLandmarkCount = 12;

// An RGB image with values in [-1, 1], stored planar (channel, row, col).
class FrameImage {
 public:
  FrameImage() = default;
  FrameImage(int height, int width, float fill = 0.0f);
  FrameImage(int height, int width, std::vector<float> planar);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }

  float at(int c, int y, int x) const { return pixels_[index(c, y, x)]; }
  float& at(int c, int y, int x) { return pixels_[index(c, y, x)]; }

  std::span<const float> pixels() const { return pixels_; }
  std::span<float> pixels() { return pixels_; }

  void validate() const;
  bool operator==(const FrameImage&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

struct SampleRecord {
  std::string id;
  std::string text;
  std::vector<AUPSVector> aups_seq;
  std::vector<FrameImage> frames;

  std::size_t num_frames() const { return aups_seq.size(); }
  // len(aups_seq) == len(frames) >= 1; frames may be empty for AU-only samples.
  void validate(bool require_frames = true) const;
};

AUPSVector normalize_aups(const AUPSVector& raw);
AUPSVector denormalize_aups(const AUPSVector& normalized);

// Pointwise mean over landmark sets. Each coordinate is summed in sorted order
// so the result does not depend on the order of `sets`.
LandmarkSet average_landmarks(std::span<const LandmarkSet> sets);

}  // namespace anchor::core
