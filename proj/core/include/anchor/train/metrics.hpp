#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "anchor/core/types.hpp"

namespace anchor::train {

// Images in [-1, 1]; peak-to-peak 2, so PSNR = 10 log10(4 / mse). Identical
// images give +inf.
double frame_mse(const core::FrameImage& a, const core::FrameImage& b);
double psnr_db(const core::FrameImage& a, const core::FrameImage& b);

// Mean SSIM over all fully contained 7x7 windows and the three channels,
// uniform window weights, dynamic range L = 2.
double ssim(const core::FrameImage& a, const core::FrameImage& b);

// Mean squared difference of normalized AU+PS over the common prefix.
double aups_mse(std::span<const core::AUPSVector> a, std::span<const core::AUPSVector> b);

// Mean |x_t - x_{t-1}| over pixels and consecutive pairs; 0 for < 2 frames.
double mean_frame_motion(std::span<const core::FrameImage> frames);

struct SampleMetrics {
  std::string id;
  std::size_t frames_pred = 0;
  std::size_t frames_gt = 0;
  double au_mse = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double temporal_l1 = 0.0;
  std::vector<double> frame_psnr;  // aligned frames only
};

struct MetricsReport {
  double au_mse = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double temporal_l1 = 0.0;
  std::vector<SampleMetrics> samples;
};

// Scores one predicted sequence against ground truth over the common prefix.
SampleMetrics score_sample(const std::string& id, std::span<const core::AUPSVector> pred_aups,
                           std::span<const core::FrameImage> pred_frames,
                           std::span<const core::AUPSVector> gt_aups,
                           std::span<const core::FrameImage> gt_frames);

// Sample means; psnr is the mean of per-sample mean PSNR.
MetricsReport summarize(std::vector<SampleMetrics> samples);

// "inf" for +infinity, otherwise %.6f.
std::string format_metric(double v);

// Flat "key=value" lines, and a per-sample CSV.
std::string report_text(const MetricsReport& report);
std::string report_csv(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace anchor::train
