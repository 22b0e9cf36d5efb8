#include "anchor/train/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "anchor/core/errors.hpp"

namespace anchor::train {
namespace {

void check_same_size(const core::FrameImage& a, const core::FrameImage& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("frames differ in size");
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double frame_mse(const core::FrameImage& a, const core::FrameImage& b) {
  check_same_size(a, b);
  const auto pa = a.pixels(), pb = b.pixels();
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    s += d * d;
  }
  return s / static_cast<double>(pa.size());
}

double psnr_db(const core::FrameImage& a, const core::FrameImage& b) {
  const double mse = frame_mse(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(4.0 / mse);
}

double ssim(const core::FrameImage& a, const core::FrameImage& b) {
  check_same_size(a, b);
  constexpr int kWin = 7;
  constexpr double kL = 2.0;
  constexpr double c1 = (0.01 * kL) * (0.01 * kL);
  constexpr double c2 = (0.03 * kL) * (0.03 * kL);
  const int h = a.height(), w = a.width();
  if (h < kWin || w < kWin) throw ShapeError("ssim needs images of at least 7x7");
  const double n = kWin * kWin;
  double total = 0.0;
  std::size_t windows = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y0 = 0; y0 + kWin <= h; ++y0) {
      for (int x0 = 0; x0 + kWin <= w; ++x0) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = y0; y < y0 + kWin; ++y) {
          for (int x = x0; x < x0 + kWin; ++x) {
            const double va = a.at(c, y, x), vb = b.at(c, y, x);
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
          }
        }
        const double ma = sa / n, mb = sb / n;
        // Unbiased (n - 1) covariance, the common SSIM convention.
        const double va = (saa - n * ma * ma) / (n - 1);
        const double vb = (sbb - n * mb * mb) / (n - 1);
        const double cov = (sab - n * ma * mb) / (n - 1);
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

double aups_mse(std::span<const core::AUPSVector> a, std::span<const core::AUPSVector> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) throw EvaluationError("no aligned AU+PS frames to compare");
  double s = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < core::kAUPSDim; ++d) {
      const double diff = a[t][d] - b[t][d];
      s += diff * diff;
    }
  }
  return s / static_cast<double>(n * core::kAUPSDim);
}

double mean_frame_motion(std::span<const core::FrameImage> frames) {
  if (frames.size() < 2) return 0.0;
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    check_same_size(frames[t], frames[t - 1]);
    const auto p = frames[t].pixels(), q = frames[t - 1].pixels();
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(static_cast<double>(p[i]) - q[i]);
    count += p.size();
  }
  return s / static_cast<double>(count);
}

SampleMetrics score_sample(const std::string& id, std::span<const core::AUPSVector> pred_aups,
                           std::span<const core::FrameImage> pred_frames,
                           std::span<const core::AUPSVector> gt_aups,
                           std::span<const core::FrameImage> gt_frames) {
  if (pred_frames.empty() || pred_aups.empty()) {
    throw EvaluationError("sample " + id + ": inference produced no frames");
  }
  SampleMetrics m;
  m.id = id;
  m.frames_pred = pred_frames.size();
  m.frames_gt = gt_frames.size();
  m.au_mse = aups_mse(pred_aups, gt_aups);
  const std::size_t n = std::min(pred_frames.size(), gt_frames.size());
  if (n == 0) throw EvaluationError("sample " + id + ": no aligned frames");
  std::vector<double> ssims;
  for (std::size_t t = 0; t < n; ++t) {
    m.frame_psnr.push_back(psnr_db(pred_frames[t], gt_frames[t]));
    ssims.push_back(ssim(pred_frames[t], gt_frames[t]));
  }
  m.psnr_db = mean_of(m.frame_psnr);
  m.ssim = mean_of(ssims);
  m.temporal_l1 = std::abs(mean_frame_motion(pred_frames.first(n)) -
                           mean_frame_motion(gt_frames.first(n)));
  return m;
}

MetricsReport summarize(std::vector<SampleMetrics> samples) {
  if (samples.empty()) throw EvaluationError("no samples evaluated");
  MetricsReport r;
  std::vector<double> au, ps, ss, tl;
  for (const auto& s : samples) {
    au.push_back(s.au_mse);
    ps.push_back(s.psnr_db);
    ss.push_back(s.ssim);
    tl.push_back(s.temporal_l1);
  }
  r.au_mse = mean_of(au);
  r.psnr_db = mean_of(ps);
  r.ssim = mean_of(ss);
  r.temporal_l1 = mean_of(tl);
  r.samples = std::move(samples);
  return r;
}

std::string format_metric(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string report_text(const MetricsReport& r) {
  std::string out;
  out += "au_mse=" + format_metric(r.au_mse) + "\n";
  out += "psnr_db=" + format_metric(r.psnr_db) + "\n";
  out += "ssim=" + format_metric(r.ssim) + "\n";
  out += "temporal_l1=" + format_metric(r.temporal_l1) + "\n";
  out += "num_samples=" + std::to_string(r.samples.size()) + "\n";
  return out;
}

std::string report_csv(const MetricsReport& r) {
  std::string out = "id,frames_pred,frames_gt,au_mse,psnr_db,ssim,temporal_l1\n";
  for (const auto& s : r.samples) {
    out += s.id + "," + std::to_string(s.frames_pred) + "," + std::to_string(s.frames_gt) + "," +
           format_metric(s.au_mse) + "," + format_metric(s.psnr_db) + "," + format_metric(s.ssim) +
           "," + format_metric(s.temporal_l1) + "\n";
  }
  return out;
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream txt(path);
  if (!txt) throw IoError("cannot write report " + path.string());
  txt << report_text(report);
  auto csv_path = path;
  csv_path.replace_extension(".csv");
  if (csv_path == path) csv_path += ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write report " + csv_path.string());
  csv << report_csv(report);
}

}  // namespace anchor::train
