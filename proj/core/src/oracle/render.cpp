#include "anchor/oracle/render.hpp"

#include <algorithm>
#include <cmath>

#include "anchor/core/errors.hpp"

// This file is compiled with -ffp-contract=off so the rasterizer produces the
// same bytes regardless of FMA availability.

namespace anchor::oracle {
namespace {

using core::AUPSVector;
using core::Point2;

// AU-dependent shape parameters in face coordinates.
struct FaceShape {
  double eye_half_height;
  Point2 brow_left_inner, brow_left_outer, brow_right_inner, brow_right_outer;
  double mouth_half_width;
  double corner_lift;
  double opening;
  double jaw_drop;
};

FaceShape shape_for(const AUPSVector& v, const RenderSpec& s) {
  namespace au = core::au;
  FaceShape f{};
  f.eye_half_height = s.eye_half_height * (1.0 - s.blink_gain * v.au[au::kBlink]);
  const double lower = s.brow_lower_gain * v.au[au::kBrowLowerer];
  const double inner = s.brow_raise_gain * v.au[au::kInnerBrowRaiser] - lower;
  const double outer = s.brow_raise_gain * v.au[au::kOuterBrowRaiser] - 0.5 * lower;
  f.brow_left_inner = {s.eye_left.x + s.brow_half_length, s.brow_y - inner};
  f.brow_left_outer = {s.eye_left.x - s.brow_half_length, s.brow_y - outer};
  f.brow_right_inner = {s.eye_right.x - s.brow_half_length, s.brow_y - inner};
  f.brow_right_outer = {s.eye_right.x + s.brow_half_length, s.brow_y - outer};
  f.mouth_half_width = s.mouth_half_width +
                       s.mouth_widen_gain * (v.au[au::kLipStretcher] + v.au[au::kLipCornerPuller]);
  f.corner_lift = s.corner_lift_gain * v.au[au::kLipCornerPuller];
  f.opening = s.mouth_open_gain * (0.35 * v.au[au::kLipsPart] + 0.65 * v.au[au::kJawDrop]);
  f.jaw_drop = 0.5 * f.opening;
  return f;
}

// Canonical face -> image: shear by yaw, rotate by roll about the face
// center, then shift by (yaw, pitch).
struct PoseTransform {
  Point2 center;
  double shear, dx, dy, cos_t, sin_t;

  PoseTransform(const AUPSVector& v, const RenderSpec& s) : center(s.face_center) {
    namespace ps = core::pose;
    shear = s.yaw_shear_gain * v.pose[ps::kYaw];
    dx = s.yaw_shift_gain * v.pose[ps::kYaw];
    dy = s.pitch_shift_gain * v.pose[ps::kPitch];
    const double theta = s.roll_gain * v.pose[ps::kRoll];
    cos_t = std::cos(theta);
    sin_t = std::sin(theta);
  }

  Point2 forward(Point2 q) const {
    const double x = (q.x - center.x) + shear * (q.y - center.y);
    const double y = q.y - center.y;
    return {center.x + cos_t * x - sin_t * y + dx, center.y + sin_t * x + cos_t * y + dy};
  }

  Point2 inverse(Point2 p) const {
    const double ex = p.x - center.x - dx;
    const double ey = p.y - center.y - dy;
    const double x = cos_t * ex + sin_t * ey;
    const double y = -sin_t * ex + cos_t * ey;
    return {center.x + x - shear * y, center.y + y};
  }
};

bool in_ellipse(Point2 q, Point2 c, double rx, double ry) {
  if (rx <= 0.0 || ry <= 0.0) return false;
  const double a = (q.x - c.x) / rx;
  const double b = (q.y - c.y) / ry;
  return a * a + b * b <= 1.0;
}

bool in_capsule(Point2 q, Point2 a, Point2 b, double radius) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((q.x - a.x) * vx + (q.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = q.x - (a.x + t * vx), dy = q.y - (a.y + t * vy);
  return dx * dx + dy * dy <= radius * radius;
}

struct MouthCurves {
  double center, top, bottom, lip;
};

MouthCurves mouth_at(double s, const FaceShape& f, const RenderSpec& spec) {
  const double bulge = 1.0 - s * s;
  MouthCurves m{};
  m.center = spec.mouth_center.y - f.corner_lift * s * s;
  m.top = m.center - 0.3 * f.opening * bulge;
  m.bottom = m.center + 0.7 * f.opening * bulge;
  m.lip = spec.lip_thickness * (0.6 + 0.4 * bulge);
  return m;
}

Rgb shade(Point2 q, const FaceShape& f, const RenderSpec& s) {
  Rgb c = s.background;
  Point2 face_c = s.face_center;
  double ry = s.face_radius.y;
  if (q.y > face_c.y) ry += f.jaw_drop;
  if (!in_ellipse(q, face_c, s.face_radius.x, ry)) return c;
  c = s.skin;
  if (in_ellipse(q, s.nose_center, s.nose_radius.x, s.nose_radius.y)) c = s.nose;
  if (in_ellipse(q, s.eye_left, s.eye_half_width, f.eye_half_height) ||
      in_ellipse(q, s.eye_right, s.eye_half_width, f.eye_half_height)) {
    c = s.eye;
  }
  if (in_capsule(q, f.brow_left_inner, f.brow_left_outer, s.brow_half_thickness) ||
      in_capsule(q, f.brow_right_inner, f.brow_right_outer, s.brow_half_thickness)) {
    c = s.brow;
  }
  const double sx = (q.x - s.mouth_center.x) / f.mouth_half_width;
  if (sx > -1.0 && sx < 1.0) {
    const MouthCurves m = mouth_at(sx, f, s);
    if (q.y > m.top && q.y < m.bottom) {
      c = s.mouth;
    } else if ((q.y > m.top - m.lip && q.y <= m.top) || (q.y >= m.bottom && q.y < m.bottom + m.lip)) {
      c = s.lip;
    }
  }
  return c;
}

void check_normalized(const AUPSVector& v) {
  if (!v.normalized) throw ContractError("render_face expects a normalized AU+PS vector");
  v.validate();
}

}  // namespace

std::vector<std::uint8_t> render_face_rgb(const AUPSVector& v, const RenderSpec& spec) {
  check_normalized(v);
  if (spec.height < 1 || spec.width < 1 || spec.supersample < 1) {
    throw ConfigError("render spec needs positive size and supersample");
  }
  const FaceShape f = shape_for(v, spec);
  const PoseTransform pose(v, spec);
  const int ss = spec.supersample;
  const int n = ss * ss;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(spec.height) * spec.width * 3);
  for (int py = 0; py < spec.height; ++py) {
    for (int px = 0; px < spec.width; ++px) {
      int r = 0, g = 0, b = 0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const Point2 p{(px + (sx + 0.5) / ss) / spec.width, (py + (sy + 0.5) / ss) / spec.height};
          const Rgb c = shade(pose.inverse(p), f, spec);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      }
      std::uint8_t* dst = out.data() + (static_cast<std::size_t>(py) * spec.width + px) * 3;
      dst[0] = static_cast<std::uint8_t>((r + n / 2) / n);
      dst[1] = static_cast<std::uint8_t>((g + n / 2) / n);
      dst[2] = static_cast<std::uint8_t>((b + n / 2) / n);
    }
  }
  return out;
}

core::FrameImage render_face(const AUPSVector& v, const RenderSpec& spec) {
  return rgb_to_frame(render_face_rgb(v, spec), spec.height, spec.width);
}

core::LandmarkSet face_landmarks(const AUPSVector& v, const RenderSpec& spec) {
  check_normalized(v);
  const FaceShape f = shape_for(v, spec);
  const PoseTransform pose(v, spec);
  const double ew = spec.eye_half_width;
  const MouthCurves corner = mouth_at(1.0, f, spec);
  const MouthCurves mid = mouth_at(0.0, f, spec);
  const double mx = spec.mouth_center.x;
  const double jaw_y = spec.jaw_y + f.jaw_drop;
  auto midpoint = [](Point2 a, Point2 b) { return Point2{(a.x + b.x) / 2, (a.y + b.y) / 2}; };
  const std::array<Point2, kFaceLandmarks> face = {{
      {spec.eye_left.x - ew, spec.eye_left.y},
      {spec.eye_left.x + ew, spec.eye_left.y},
      {spec.eye_right.x - ew, spec.eye_right.y},
      {spec.eye_right.x + ew, spec.eye_right.y},
      midpoint(f.brow_left_inner, f.brow_left_outer),
      midpoint(f.brow_right_inner, f.brow_right_outer),
      {mx - f.mouth_half_width, corner.center},
      {mx + f.mouth_half_width, corner.center},
      {mx, mid.top - mid.lip},
      {mx, mid.bottom + mid.lip},
      {spec.face_center.x - spec.jaw_half_span, jaw_y},
      {spec.face_center.x + spec.jaw_half_span, jaw_y},
  }};
  core::LandmarkSet out;
  out.points.reserve(face.size());
  for (const auto& q : face) {
    const Point2 p = pose.forward(q);
    out.points.push_back({std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)});
  }
  return out;
}

core::FrameImage rgb_to_frame(const std::vector<std::uint8_t>& rgb, int height, int width) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (rgb.size() != plane * 3) throw ShapeError("RGB buffer size does not match image size");
  std::vector<float> planar(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      planar[c * plane + i] = static_cast<float>(rgb[i * 3 + c]) / 127.5f - 1.0f;
    }
  }
  return core::FrameImage(height, width, std::move(planar));
}

std::vector<std::uint8_t> frame_to_rgb(const core::FrameImage& frame) {
  const std::size_t plane = static_cast<std::size_t>(frame.height()) * frame.width();
  std::vector<std::uint8_t> rgb(plane * 3);
  const auto px = frame.pixels();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(px[c * plane + i], -1.0f, 1.0f);
      rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
    }
  }
  return rgb;
}

}  // namespace anchor::oracle
