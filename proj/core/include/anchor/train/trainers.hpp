#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "anchor/gan/losses.hpp"
#include "anchor/nn/adam.hpp"
#include "anchor/oracle/corpus.hpp"
#include "anchor/seq2au/model.hpp"
#include "anchor/train/checkpoint.hpp"
#include "anchor/train/pipeline.hpp"

namespace anchor::train {

struct TrainOptions {
  std::int64_t steps = -1;             // total steps; < 0 uses the config value
  std::filesystem::path out_dir;       // empty: write nothing
  const Checkpoint* resume = nullptr;  // continue from this state
  std::function<void(const std::string&)> log;  // one line per step
};

// Stage 1 training state. Batches are a pure function of (seed, step), so a
// resumed run replays exactly what an uninterrupted run would have done.
class Seq2AUTrainer {
 public:
  Seq2AUTrainer(const core::PipelineConfig& config, const oracle::Corpus& corpus);

  void restore(const Checkpoint& ckpt);
  Checkpoint checkpoint() const;

  std::vector<std::size_t> batch_for_step(std::int64_t step) const;
  seq2au::LossReport step();
  // Learning rate and teacher-forcing ratio used at `step`.
  double lr_at(std::int64_t step) const;
  double teacher_ratio_at(std::int64_t step) const;
  std::int64_t steps_done() const { return step_; }

  seq2au::Seq2AU<float>& model() { return model_; }
  const std::vector<seq2au::Example>& examples() const { return examples_; }

 private:
  core::PipelineConfig config_;
  text::EmbeddingTable table_;
  std::vector<seq2au::Example> examples_;
  seq2au::Seq2AU<float> model_;
  nn::Adam<float> opt_;
  std::int64_t step_ = 0;
};

struct Seq2AURun {
  Checkpoint final;
  std::vector<seq2au::LossReport> losses;  // steps run in this call
};

// Corpus problems surface as data errors before the first step.
Seq2AURun train_seq2au(const oracle::Corpus& corpus, const core::PipelineConfig& config,
                       const TrainOptions& options = {});

struct GanLossReport {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_fm = 0.0;
  double g_perc = 0.0;
};

struct GanMode {
  bool gt_aups = true;                      // condition on corpus AU+PS
  const Seq2AUBundle* seq2au = nullptr;     // otherwise on stage-1 predictions
};

class GanTrainer {
 public:
  GanTrainer(const core::PipelineConfig& config, const oracle::Corpus& corpus,
             const GanMode& mode = {});

  void restore(const Checkpoint& ckpt);
  Checkpoint checkpoint() const;

  // (N, C, H, W) stacks with ground-truth prior frames, and real frames.
  gan::WindowBatch<float> batch_for_step(std::int64_t step) const;
  // One D update then one G update on the batch. With update_d = false the
  // discriminator stays frozen.
  GanLossReport step(const gan::WindowBatch<float>& batch, bool update_d = true);
  GanLossReport step();
  // Learning rate used by both optimizers at `step`.
  double lr_at(std::int64_t step) const;
  std::int64_t steps_done() const { return step_; }
  std::size_t num_windows() const { return windows_.size(); }

  gan::Generator<float>& generator() { return g_; }
  gan::Discriminator<float>& discriminator() { return d_; }
  const gan::FeatureExtractor<float>& extractor() const { return extractor_; }
  gan::LossWeights weights() const;

 private:
  struct WindowRef {
    std::size_t sample, frame;
  };
  cond::ConditioningStack stack_for(const WindowRef& w) const;
  cond::ConditioningStack start_stack_for(const WindowRef& w) const;

  core::PipelineConfig config_;
  const oracle::Corpus& corpus_;
  std::vector<std::vector<core::AUPSVector>> cond_aups_;  // per sample, aligned to frames
  nn::Tensor<float> heatmap_;
  std::vector<WindowRef> windows_;
  gan::Generator<float> g_;
  gan::Discriminator<float> d_;
  gan::RandomConvExtractor<float> extractor_;
  nn::Adam<float> opt_g_, opt_d_;
  std::int64_t step_ = 0;
};

struct GanRun {
  Checkpoint final;
  std::vector<GanLossReport> losses;
};

GanRun train_gan(const oracle::Corpus& corpus, const core::PipelineConfig& config,
                 const GanMode& mode = {}, const TrainOptions& options = {});

}  // namespace anchor::train
