#include "anchor/core/config.hpp"

#include "anchor/core/errors.hpp"
#include "json.hpp"

namespace anchor::core {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OracleConfig, frames_per_word, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Seq2AUConfig, hidden, layers, t_max,
                                                lambda_stop, lr, beta1, beta2, batch_size,
                                                steps, checkpoint_every, teacher_forcing, teacher_forcing_ramp,
                                                grad_clip, lr_decay_start,
                                                finetune_embeddings,
                                                fallback_seed, embeddings)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GanConfig, ngf, ndf, n_res, n_down, n_scales,
                                                d_layers, norm, gan_mode, lambda_fm,
                                                lambda_perc, lr, beta1, beta2, batch_size, steps,
                                                checkpoint_every, scheduled_sampling,
                                                prior_dropout, lr_decay_start, max_frames)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, n_prior, image_h, image_w,
                                                embed_dim, num_landmarks, landmark_sigma_px,
                                                repeat_flm, seed, oracle, seq2au, gan)

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void check_keys(const nlohmann::json& reference, const nlohmann::json& patch,
                const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + prefix + key + "'");
    if (reference[key].is_object()) check_keys(reference[key], value, prefix + key + ".");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  require(n_prior >= 0, "n_prior must be >= 0");
  require(image_h >= 1 && image_w >= 1, "image_h and image_w must be >= 1");
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(num_landmarks >= 1, "num_landmarks must be >= 1");
  require(landmark_sigma_px > 0.0, "landmark_sigma_px must be > 0");
  require(oracle.frames_per_word >= 1, "oracle.frames_per_word must be >= 1");
  require(seq2au.t_max >= 1, "seq2au.t_max must be >= 1");
  require(seq2au.hidden >= 1 && seq2au.layers >= 1, "seq2au.hidden and layers must be >= 1");
  require(seq2au.lambda_stop >= 0.0, "seq2au.lambda_stop must be >= 0");
  require(seq2au.teacher_forcing >= 0.0 && seq2au.teacher_forcing <= 1.0,
          "seq2au.teacher_forcing must be in [0,1]");
  require(seq2au.teacher_forcing_ramp >= 0.0 && seq2au.teacher_forcing_ramp <= 1.0,
          "seq2au.teacher_forcing_ramp must be in [0,1]");
  require(seq2au.grad_clip >= 0.0, "seq2au.grad_clip must be >= 0");
  require(seq2au.lr_decay_start >= 0.0 && seq2au.lr_decay_start <= 1.0,
          "seq2au.lr_decay_start must be in [0,1]");
  require(seq2au.lr > 0.0 && gan.lr > 0.0, "learning rates must be > 0");
  require(seq2au.batch_size >= 1 && gan.batch_size >= 1, "batch sizes must be >= 1");
  require(seq2au.steps >= 0 && gan.steps >= 0, "step counts must be >= 0");
  require(gan.lambda_fm >= 0.0 && gan.lambda_perc >= 0.0, "loss weights must be >= 0");
  require(gan.norm == "none" || gan.norm == "instance", "gan.norm must be none|instance");
  require(gan.gan_mode == "log" || gan.gan_mode == "lsgan", "gan.gan_mode must be log|lsgan");
  require(gan.n_scales >= 1 && gan.d_layers >= 2, "gan.n_scales >= 1 and gan.d_layers >= 2");
  require(gan.ngf >= 1 && gan.ndf >= 1 && gan.n_res >= 0 && gan.n_down >= 0,
          "generator/discriminator widths must be positive");
  require(gan.scheduled_sampling >= 0.0 && gan.scheduled_sampling <= 1.0,
          "gan.scheduled_sampling must be in [0,1]");
  require(gan.prior_dropout >= 0.0 && gan.prior_dropout <= 1.0,
          "gan.prior_dropout must be in [0,1]");
  require(gan.lr_decay_start >= 0.0 && gan.lr_decay_start <= 1.0,
          "gan.lr_decay_start must be in [0,1]");
  const int factor = 1 << gan.n_down;
  require(image_h % factor == 0 && image_w % factor == 0,
          "image size must be divisible by 2^gan.n_down");
}

std::string config_to_json(const PipelineConfig& config) {
  return nlohmann::json(config).dump(2);
}

PipelineConfig config_from_json(std::string_view text) {
  return merge_config(PipelineConfig{}, text);
}

PipelineConfig merge_config(const PipelineConfig& base, std::string_view text) {
  nlohmann::json patch;
  try {
    patch = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  nlohmann::json j = base;
  check_keys(j, patch, "");
  j.merge_patch(patch);
  PipelineConfig out;
  try {
    out = j.get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  out.validate();
  return out;
}

}  // namespace anchor::core
