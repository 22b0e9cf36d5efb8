#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace anchor::core {

struct OracleConfig {
  int frames_per_word = 4;
  std::uint64_t seed = 7;
};

struct Seq2AUConfig {
  int hidden = 128;
  int layers = 1;
  int t_max = 120;
  double lambda_stop = 0.5;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 20;
  int steps = 2000;
  int checkpoint_every = 500;
  double teacher_forcing = 1.0;  // chance a decoder step sees the ground-truth previous frame
  double teacher_forcing_ramp = 0.0;  // fraction of steps to anneal from 1 to teacher_forcing
  double grad_clip = 0.0;        // global gradient-norm cap; 0 disables
  double lr_decay_start = 1.0;   // fraction of steps after which lr falls linearly to 0
  bool finetune_embeddings = false;
  std::uint64_t fallback_seed = 17;
  std::string embeddings;  // word2vec text file; empty means all words use the fallback
};

struct GanConfig {
  int ngf = 16;
  int ndf = 16;
  int n_res = 4;
  int n_down = 2;
  int n_scales = 2;
  int d_layers = 4;
  std::string norm = "none";       // "none" | "instance"
  std::string gan_mode = "log";    // "log" | "lsgan"
  double lambda_fm = 10.0;
  double lambda_perc = 10.0;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  int steps = 3000;
  int checkpoint_every = 1000;
  double scheduled_sampling = 0.0;
  double prior_dropout = 0.0;      // chance a window is trained as a sequence start
  double lr_decay_start = 1.0;     // fraction of steps after which lr falls linearly to 0
  int max_frames = 0;              // 0 = use every frame of every sample
};

struct PipelineConfig {
  int n_prior = 2;
  int image_h = 64;
  int image_w = 64;
  int embed_dim = 200;
  int num_landmarks = 12;
  double landmark_sigma_px = 1.5;
  bool repeat_flm = false;
  std::uint64_t seed = 1234;
  OracleConfig oracle;
  Seq2AUConfig seq2au;
  GanConfig gan;

  // Throws ConfigError on the first violated constraint.
  void validate() const;
};

// Pretty-printed JSON with every field present.
std::string config_to_json(const PipelineConfig& config);

// Parses a full or partial JSON object over the defaults and validates it.
PipelineConfig config_from_json(std::string_view text);

// Overlays keys present in the JSON object `patch` onto `base`. Unknown keys
// are a ConfigError.
PipelineConfig merge_config(const PipelineConfig& base, std::string_view patch);

}  // namespace anchor::core
