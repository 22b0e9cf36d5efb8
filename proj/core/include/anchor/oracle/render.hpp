#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "anchor/core/types.hpp"

namespace anchor::oracle {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Geometry, palette and pose gains of the synthetic face. Face coordinates are
// normalized image coordinates of the unposed face, x right and y down.
struct RenderSpec {
  int height = 64;
  int width = 64;
  int supersample = 4;  // SxS stratified samples per pixel

  core::Point2 face_center{0.5, 0.52};
  core::Point2 face_radius{0.30, 0.38};
  core::Point2 eye_left{0.39, 0.44};
  core::Point2 eye_right{0.61, 0.44};
  double eye_half_width = 0.055;
  double eye_half_height = 0.032;
  double brow_y = 0.36;
  double brow_half_length = 0.065;
  double brow_half_thickness = 0.012;
  core::Point2 nose_center{0.5, 0.57};
  core::Point2 nose_radius{0.022, 0.04};
  core::Point2 mouth_center{0.5, 0.69};
  double mouth_half_width = 0.10;
  double lip_thickness = 0.018;
  double jaw_y = 0.80;
  double jaw_half_span = 0.24;

  double mouth_open_gain = 0.16;
  double corner_lift_gain = 0.05;
  double mouth_widen_gain = 0.03;
  double brow_raise_gain = 0.06;
  double brow_lower_gain = 0.025;
  double blink_gain = 0.9;
  double yaw_shift_gain = 0.25;
  double yaw_shear_gain = 0.2;
  double pitch_shift_gain = 0.15;
  double roll_gain = 0.5;  // radians of in-plane rotation at |roll| = 1

  Rgb background{36, 44, 62};
  Rgb skin{226, 186, 152};
  Rgb nose{204, 160, 128};
  Rgb eye{34, 28, 30};
  Rgb brow{92, 60, 40};
  Rgb lip{184, 82, 92};
  Rgb mouth{110, 22, 36};
};

// 12 landmarks: eye corners (4), brow midpoints (2), mouth corners and lip
// centers (4), jaw points (2).
inline constexpr std::size_t kFaceLandmarks = 12;

// Interleaved 8-bit RGB, row-major. Pure function of (v, spec).
std::vector<std::uint8_t> render_face_rgb(const core::AUPSVector& v, const RenderSpec& spec);

// Same image in the [-1, 1] planar convention.
core::FrameImage render_face(const core::AUPSVector& v, const RenderSpec& spec);

// Landmarks of the AU-deformed, pose-transformed face, clamped to [0,1]^2.
core::LandmarkSet face_landmarks(const core::AUPSVector& v, const RenderSpec& spec);

core::FrameImage rgb_to_frame(const std::vector<std::uint8_t>& rgb, int height, int width);
std::vector<std::uint8_t> frame_to_rgb(const core::FrameImage& frame);

}  // namespace anchor::oracle
