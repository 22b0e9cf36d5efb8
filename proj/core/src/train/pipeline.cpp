#include "anchor/train/pipeline.hpp"

#include "anchor/cond/stack.hpp"
#include "anchor/core/errors.hpp"

namespace anchor::train {

text::EmbeddingTable embedding_table_for(const core::PipelineConfig& config) {
  if (config.seq2au.embeddings.empty()) {
    return text::EmbeddingTable(config.embed_dim, config.seq2au.fallback_seed);
  }
  auto table = text::load_word2vec_text(config.seq2au.embeddings, config.seq2au.fallback_seed);
  if (table.dim() != config.embed_dim) {
    throw DataError("embedding file " + config.seq2au.embeddings + " has dimension " +
                    std::to_string(table.dim()) + ", config says " +
                    std::to_string(config.embed_dim));
  }
  return table;
}

Seq2AUBundle load_seq2au(const Checkpoint& ckpt) {
  if (!ckpt.find("seq2au/head.w")) throw FormatError("checkpoint does not hold a seq2au model");
  Seq2AUBundle b;
  b.config = core::config_from_json(ckpt.config_json);
  b.table = embedding_table_for(b.config);
  b.model = std::make_unique<seq2au::Seq2AU<float>>(b.config.seq2au, b.config.embed_dim, 0);
  std::vector<std::string> words;
  const std::string prefix = "seq2au/embed.";
  for (const auto& t : ckpt.tensors) {
    if (t.name.rfind(prefix, 0) == 0) words.push_back(t.name.substr(prefix.size()));
  }
  if (!words.empty()) b.model->add_embedding_params(b.table, words);
  restore_params(ckpt, "seq2au/", b.model->params());
  return b;
}

GanBundle load_gan(const Checkpoint& ckpt) {
  if (!ckpt.find("g/g.stem.w")) throw FormatError("checkpoint does not hold a generator");
  GanBundle b;
  b.config = core::config_from_json(ckpt.config_json);
  const auto& flm = ckpt.at("cond/avg_flm");
  if (flm.shape.size() != 2 || flm.shape[1] != 2) throw FormatError("bad cond/avg_flm tensor");
  for (int k = 0; k < flm.shape[0]; ++k) {
    b.avg_flm.points.push_back({flm.data[2 * k], flm.data[2 * k + 1]});
  }
  b.avg_flm.validate();
  b.heatmap = cond::splat_landmarks(b.avg_flm, b.config.image_h, b.config.image_w,
                                    b.config.landmark_sigma_px);
  b.generator = std::make_unique<gan::Generator<float>>(
      b.config.gan, cond::stack_channels(b.config.n_prior, b.config.repeat_flm), 0);
  restore_params(ckpt, "g/", b.generator->params());
  return b;
}

std::vector<core::AUPSVector> predict_aups(const Seq2AUBundle& s2a, const std::string& text) {
  seq2au::Example ex;
  ex.tokens = text::tokenize(text);
  ex.vectors = text::embed(ex.tokens, s2a.table).vectors;
  return s2a.model->infer(ex).aups;
}

std::vector<core::FrameImage> synthesize_frames(const GanBundle& gan,
                                                std::span<const core::AUPSVector> aups) {
  if (aups.empty()) throw EvaluationError("nothing to synthesize: empty AU+PS sequence");
  const auto& c = gan.config;
  std::vector<core::FrameImage> frames;
  frames.reserve(aups.size());
  for (std::size_t t = 0; t < aups.size(); ++t) {
    const auto w = cond::window_at(aups, frames, t, c.n_prior, c.image_h, c.image_w);
    const auto stack = cond::assemble_stack(aups[t], w.priors, gan.heatmap, w.prior_frames, c);
    frames.push_back(gan.generator->generate(stack));
  }
  return frames;
}

MetricsReport evaluate(const Seq2AUBundle* s2a, const GanBundle* gan, const oracle::Corpus& corpus,
                       const EvalOptions& options) {
  if (!options.gt_aups && !s2a) throw ConfigError("evaluation needs a seq2au checkpoint");
  if (!options.gt_frames && !gan) throw ConfigError("evaluation needs a GAN checkpoint");
  std::vector<SampleMetrics> results;
  for (const auto& s : corpus.samples) {
    if (s.frames.size() != s.aups_seq.size()) {
      throw DataError("sample " + s.id + " was loaded without frames");
    }
    const auto aups = options.gt_aups ? s.aups_seq : predict_aups(*s2a, s.text);
    const auto frames = options.gt_frames ? s.frames : synthesize_frames(*gan, aups);
    results.push_back(score_sample(s.id, aups, frames, s.aups_seq, s.frames));
  }
  return summarize(std::move(results));
}

}  // namespace anchor::train
