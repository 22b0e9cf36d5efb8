#pragma once

#include <memory>
#include <string>
#include <vector>

#include "anchor/core/config.hpp"
#include "anchor/core/types.hpp"
#include "anchor/gan/networks.hpp"
#include "anchor/oracle/corpus.hpp"
#include "anchor/seq2au/model.hpp"
#include "anchor/text/frontend.hpp"
#include "anchor/train/checkpoint.hpp"
#include "anchor/train/metrics.hpp"

namespace anchor::train {

// Trained stage-1 model with the embedding table it reads words through.
struct Seq2AUBundle {
  core::PipelineConfig config;
  std::unique_ptr<seq2au::Seq2AU<float>> model;
  text::EmbeddingTable table;
};

// Trained generator with the average landmark set it was conditioned on.
struct GanBundle {
  core::PipelineConfig config;
  std::unique_ptr<gan::Generator<float>> generator;
  core::LandmarkSet avg_flm;
  nn::Tensor<float> heatmap;
};

text::EmbeddingTable embedding_table_for(const core::PipelineConfig& config);

Seq2AUBundle load_seq2au(const Checkpoint& ckpt);
GanBundle load_gan(const Checkpoint& ckpt);

// Text -> AU+PS via greedy decoding.
std::vector<core::AUPSVector> predict_aups(const Seq2AUBundle& s2a, const std::string& text);

// Autoregressive synthesis: frame t is conditioned on the frames synthesized
// for t-n .. t-1 (zeros before the start).
std::vector<core::FrameImage> synthesize_frames(const GanBundle& gan,
                                                std::span<const core::AUPSVector> aups);

struct EvalOptions {
  bool gt_aups = false;    // condition on ground-truth AU+PS instead of stage 1
  bool gt_frames = false;  // score the oracle frames instead of synthesized ones
};

// Full inference per sample, scored against the corpus. Ground-truth frames
// are only read for scoring (or when gt_frames is set).
MetricsReport evaluate(const Seq2AUBundle* s2a, const GanBundle* gan, const oracle::Corpus& corpus,
                       const EvalOptions& options = {});

}  // namespace anchor::train
