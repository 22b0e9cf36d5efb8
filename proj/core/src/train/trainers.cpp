#include "anchor/train/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "anchor/cond/stack.hpp"
#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/nn/ops.hpp"

namespace anchor::train {
namespace {

// Constant until floor(start * total), then linear to 0 at `total`.
double decayed_lr(double lr, double start_frac, int total_steps, std::int64_t step) {
  const double total = total_steps;
  const double start = std::floor(start_frac * total);
  if (static_cast<double>(step) < start || total <= start) return lr;
  return lr * std::max(0.0, (total - static_cast<double>(step)) / (total - start));
}

std::uint64_t stream_seed(const core::PipelineConfig& c, const char* stream) {
  return core::mix_seed(c.seed, core::fnv1a(stream));
}

nn::AdamOptions adam_options(double lr, double b1, double b2) { return {lr, b1, b2, 1e-8}; }

std::filesystem::path step_path(const std::filesystem::path& dir, std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld.anch", static_cast<long long>(step));
  return dir / "checkpoints" / buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Run length and checkpoint cadence may change across a resume; nothing else.
core::PipelineConfig schedule_free(core::PipelineConfig c) {
  c.seq2au.steps = c.gan.steps = 0;
  c.seq2au.checkpoint_every = c.gan.checkpoint_every = 0;
  return c;
}

void check_compatible(const Checkpoint& ckpt, const core::PipelineConfig& config) {
  const auto saved = core::config_from_json(ckpt.config_json);
  if (core::config_to_json(schedule_free(saved)) != core::config_to_json(schedule_free(config))) {
    throw ConfigError("resume checkpoint was written with a different configuration");
  }
}

std::vector<seq2au::Example> build_examples(const core::PipelineConfig& config,
                                            const oracle::Corpus& corpus,
                                            const text::EmbeddingTable& table) {
  if (corpus.samples.empty()) throw DataError("corpus has no samples");
  std::vector<seq2au::Example> out;
  for (const auto& s : corpus.samples) {
    if (static_cast<int>(s.aups_seq.size()) > config.seq2au.t_max) {
      throw LengthError("sample " + s.id + " has " + std::to_string(s.aups_seq.size()) +
                        " frames, more than t_max=" + std::to_string(config.seq2au.t_max));
    }
    out.push_back(seq2au::make_example(s, table));
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

Seq2AUTrainer::Seq2AUTrainer(const core::PipelineConfig& config, const oracle::Corpus& corpus)
    : config_(config),
      table_(embedding_table_for(config)),
      examples_(build_examples(config, corpus, table_)),
      model_(config.seq2au, config.embed_dim, stream_seed(config, "seq2au.init")) {
  config.validate();
  if (config.seq2au.finetune_embeddings) {
    std::vector<std::string> vocab;
    for (const auto& ex : examples_) {
      for (const auto& t : ex.tokens) {
        if (std::find(vocab.begin(), vocab.end(), t.surface()) == vocab.end()) {
          vocab.push_back(t.surface());
        }
      }
    }
    model_.add_embedding_params(table_, vocab);
  }
  opt_ = nn::Adam<float>(model_.params(), adam_options(config.seq2au.lr, config.seq2au.beta1,
                                                        config.seq2au.beta2));
}

void Seq2AUTrainer::restore(const Checkpoint& ckpt) {
  check_compatible(ckpt, config_);
  restore_params(ckpt, "seq2au/", model_.params());
  restore_adam(ckpt, "adam/", model_.params(), opt_);
  step_ = static_cast<std::int64_t>(ckpt.get_u64("meta/step"));
}

Checkpoint Seq2AUTrainer::checkpoint() const {
  Checkpoint c;
  store_params(c, "seq2au/", model_.params());
  store_adam(c, "adam/", model_.params(), opt_);
  c.put_u64("meta/step", static_cast<std::uint64_t>(step_));
  c.put_u64("meta/seed", config_.seed);
  c.config_json = core::config_to_json(config_);
  return c;
}

std::vector<std::size_t> Seq2AUTrainer::batch_for_step(std::int64_t step) const {
  std::vector<std::size_t> idx(examples_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto b = static_cast<std::size_t>(config_.seq2au.batch_size);
  if (b >= idx.size()) return idx;
  core::Rng rng(core::mix_seed(stream_seed(config_, "seq2au.batch"),
                               static_cast<std::uint64_t>(step)));
  for (std::size_t i = 0; i < b; ++i) {
    std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  }
  idx.resize(b);
  return idx;
}

double Seq2AUTrainer::lr_at(std::int64_t step) const {
  return decayed_lr(config_.seq2au.lr, config_.seq2au.lr_decay_start, config_.seq2au.steps, step);
}

double Seq2AUTrainer::teacher_ratio_at(std::int64_t step) const {
  const auto& c = config_.seq2au;
  const double ramp = c.teacher_forcing_ramp * c.steps;
  if (ramp <= 0.0) return c.teacher_forcing;
  return 1.0 - (1.0 - c.teacher_forcing) * std::min(1.0, static_cast<double>(step) / ramp);
}

seq2au::LossReport Seq2AUTrainer::step() {
  std::vector<const seq2au::Example*> batch;
  for (std::size_t i : batch_for_step(step_)) batch.push_back(&examples_[i]);
  core::Rng sampler(core::mix_seed(stream_seed(config_, "seq2au.sample"),
                                   static_cast<std::uint64_t>(step_)));
  opt_.set_lr(lr_at(step_));
  const auto report = model_.train_step(batch, opt_, {&sampler, teacher_ratio_at(step_)});
  ++step_;
  return report;
}

Seq2AURun train_seq2au(const oracle::Corpus& corpus, const core::PipelineConfig& config,
                       const TrainOptions& options) {
  Seq2AUTrainer trainer(config, corpus);
  if (options.resume) trainer.restore(*options.resume);
  const std::int64_t total = options.steps < 0 ? config.seq2au.steps : options.steps;
  const int every = config.seq2au.checkpoint_every;
  Seq2AURun run;
  std::string log = "step,mse,stop_bce,total\n";
  while (trainer.steps_done() < total) {
    const auto r = trainer.step();
    run.losses.push_back(r);
    const std::string line = std::to_string(trainer.steps_done()) + "," + fmt(r.mse) + "," +
                             fmt(r.stop_bce) + "," + fmt(r.total);
    log += line + "\n";
    if (options.log) options.log(line);
    if (!options.out_dir.empty() && every > 0 && trainer.steps_done() % every == 0) {
      save_checkpoint(trainer.checkpoint(), step_path(options.out_dir, trainer.steps_done()));
    }
  }
  run.final = trainer.checkpoint();
  if (!options.out_dir.empty()) {
    save_checkpoint(run.final, options.out_dir / "seq2au.anch");
    write_file(options.out_dir / "loss_log.csv", log);
  }
  return run;
}

GanTrainer::GanTrainer(const core::PipelineConfig& config, const oracle::Corpus& corpus,
                       const GanMode& mode)
    : config_(config),
      corpus_(corpus),
      g_(config.gan, cond::stack_channels(config.n_prior, config.repeat_flm),
         stream_seed(config, "gan.g")),
      d_(config.gan, cond::stack_channels(config.n_prior, config.repeat_flm), config.n_prior,
         stream_seed(config, "gan.d")),
      extractor_(stream_seed(config, "gan.perceptual")) {
  config.validate();
  if (corpus.samples.empty()) throw DataError("corpus has no samples");
  if (config.image_h != corpus.config.image_h || config.image_w != corpus.config.image_w) {
    throw ConfigError("image size differs from the corpus");
  }
  if (!mode.gt_aups && !mode.seq2au) {
    throw ConfigError("GAN training needs ground-truth AU+PS or a seq2au model");
  }
  heatmap_ = cond::splat_landmarks(corpus.avg_flm, config.image_h, config.image_w,
                                   config.landmark_sigma_px);
  for (std::size_t s = 0; s < corpus.samples.size(); ++s) {
    const auto& rec = corpus.samples[s];
    if (rec.frames.size() != rec.aups_seq.size()) {
      throw DataError("sample " + rec.id + " has no frames loaded");
    }
    std::vector<core::AUPSVector> aups =
        mode.gt_aups ? rec.aups_seq : predict_aups(*mode.seq2au, rec.text);
    aups.resize(std::min(aups.size(), rec.frames.size()), core::AUPSVector::zeros(true));
    for (std::size_t t = 0; t < aups.size(); ++t) {
      if (config.gan.max_frames > 0 && windows_.size() >= static_cast<std::size_t>(config.gan.max_frames)) {
        break;
      }
      windows_.push_back({s, t});
    }
    cond_aups_.push_back(std::move(aups));
  }
  if (windows_.empty()) throw DataError("no training windows in corpus");
  opt_g_ = nn::Adam<float>(g_.params(),
                           adam_options(config.gan.lr, config.gan.beta1, config.gan.beta2));
  opt_d_ = nn::Adam<float>(d_.params(),
                           adam_options(config.gan.lr, config.gan.beta1, config.gan.beta2));
}

gan::LossWeights GanTrainer::weights() const {
  return {config_.gan.lambda_fm, config_.gan.lambda_perc, config_.gan.gan_mode == "lsgan"};
}

cond::ConditioningStack GanTrainer::stack_for(const WindowRef& w) const {
  const auto& aups = cond_aups_[w.sample];
  const auto& frames = corpus_.samples[w.sample].frames;
  try {
    const auto win = cond::window_at(aups, frames, w.frame, config_.n_prior, config_.image_h,
                                     config_.image_w);
    return cond::assemble_stack(aups[w.frame], win.priors, heatmap_, win.prior_frames, config_);
  } catch (const ShapeError& e) {
    throw DataError("sample " + corpus_.samples[w.sample].id + ": " + e.what());
  }
}

cond::ConditioningStack GanTrainer::start_stack_for(const WindowRef& w) const {
  const auto n = static_cast<std::size_t>(config_.n_prior);
  return cond::assemble_stack(cond_aups_[w.sample][w.frame],
                              std::vector<core::AUPSVector>(n, core::AUPSVector::zeros(true)),
                              heatmap_,
                              std::vector<core::FrameImage>(n, core::FrameImage(config_.image_h, config_.image_w)),
                              config_);
}

gan::WindowBatch<float> GanTrainer::batch_for_step(std::int64_t step) const {
  core::Rng rng(core::mix_seed(stream_seed(config_, "gan.batch"), static_cast<std::uint64_t>(step)));
  const int n = config_.gan.batch_size;
  const int c = cond::stack_channels(config_.n_prior, config_.repeat_flm);
  const int h = config_.image_h, w = config_.image_w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  gan::WindowBatch<float> batch{nn::Tensor<float>({n, c, h, w}), nn::Tensor<float>({n, 3, h, w})};
  for (int i = 0; i < n; ++i) {
    const WindowRef ref = windows_[rng.below(windows_.size())];
    // Prior dropout: condition as if the window opened the sequence, so G
    // cannot lean on copying its predecessors.
    const bool as_start = config_.gan.prior_dropout > 0.0 && rng.uniform() < config_.gan.prior_dropout;
    auto stack = as_start ? start_stack_for(ref) : stack_for(ref);
    // Scheduled sampling: swap ground-truth prior frames for the generator's
    // own rendition of them.
    for (int k = 1; k <= config_.n_prior && !as_start; ++k) {
      if (!(rng.uniform() < config_.gan.scheduled_sampling) || ref.frame < static_cast<std::size_t>(k)) {
        continue;
      }
      const auto prior = g_.generate(stack_for({ref.sample, ref.frame - static_cast<std::size_t>(k)}));
      const auto& group = stack.group("frame_t-" + std::to_string(k));
      std::copy(prior.pixels().begin(), prior.pixels().end(),
                stack.channels.data() + static_cast<std::size_t>(group.offset) * plane);
    }
    std::copy(stack.channels.values().begin(), stack.channels.values().end(),
              batch.stacks.data() + static_cast<std::size_t>(i) * c * plane);
    const auto& real = corpus_.samples[ref.sample].frames[ref.frame].pixels();
    std::copy(real.begin(), real.end(), batch.real.data() + static_cast<std::size_t>(i) * 3 * plane);
  }
  return batch;
}

double GanTrainer::lr_at(std::int64_t step) const {
  return decayed_lr(config_.gan.lr, config_.gan.lr_decay_start, config_.gan.steps, step);
}

GanLossReport GanTrainer::step(const gan::WindowBatch<float>& batch, bool update_d) {
  using Var = nn::Var<float>;
  const auto w = weights();
  opt_g_.set_lr(lr_at(step_));
  opt_d_.set_lr(lr_at(step_));
  GanLossReport rep;
  nn::Tape<float> gt;
  const auto gb = gan::bind(gt, g_.params(), true);
  const Var stack = gt.constant(batch.stacks);
  const Var real = gt.constant(batch.real);
  const Var fake = g_.forward(gt, gb, stack);

  {
    nn::Tape<float> dt;
    const auto db = gan::bind(dt, d_.params(), update_d);
    const Var st = dt.constant(batch.stacks);
    const auto ro = d_.forward(dt, db, d_.window_input(st, dt.constant(batch.real)));
    const auto fo = d_.forward(dt, db, d_.window_input(st, dt.constant(fake.value())));
    std::vector<Var> rl, fl;
    for (const auto& s : ro) rl.push_back(s.logits);
    for (const auto& s : fo) fl.push_back(s.logits);
    const auto l = gan::gan_loss(rl, fl, w.lsgan);
    rep.d_loss = l.d_loss.value().item();
    if (update_d) {
      d_.params().zero_grad();
      dt.backward(l.d_loss);
      opt_d_.step(d_.params());
    }
  }

  const auto db = gan::bind(gt, d_.params(), false);
  const auto ro = d_.forward(gt, db, d_.window_input(stack, real));
  const auto fo = d_.forward(gt, db, d_.window_input(stack, fake));
  std::vector<Var> rl, fl;
  std::vector<std::vector<Var>> rf, ff;
  for (const auto& s : ro) {
    rl.push_back(s.logits);
    rf.push_back(s.features);
  }
  for (const auto& s : fo) {
    fl.push_back(s.logits);
    ff.push_back(s.features);
  }
  const Var g_adv = gan::gan_loss(rl, fl, w.lsgan).g_loss;
  const Var g_fm = gan::fm_loss(rf, ff);
  const Var g_perc = gan::perceptual_loss(gt, fake, real, extractor_);
  const Var total = nn::add(g_adv, nn::add(nn::scale(g_fm, static_cast<float>(w.lambda_fm)),
                                          nn::scale(g_perc, static_cast<float>(w.lambda_perc))));
  rep.g_adv = g_adv.value().item();
  rep.g_fm = g_fm.value().item();
  rep.g_perc = g_perc.value().item();
  g_.params().zero_grad();
  gt.backward(total);
  opt_g_.step(g_.params());
  if (!g_.params().all_finite() || !d_.params().all_finite()) {
    throw ContractError("GAN parameters became non-finite at step " + std::to_string(step_));
  }
  ++step_;
  return rep;
}

GanLossReport GanTrainer::step() { return step(batch_for_step(step_)); }

void GanTrainer::restore(const Checkpoint& ckpt) {
  check_compatible(ckpt, config_);
  restore_params(ckpt, "g/", g_.params());
  restore_params(ckpt, "d/", d_.params());
  restore_adam(ckpt, "adam_g/", g_.params(), opt_g_);
  restore_adam(ckpt, "adam_d/", d_.params(), opt_d_);
  step_ = static_cast<std::int64_t>(ckpt.get_u64("meta/step"));
}

Checkpoint GanTrainer::checkpoint() const {
  Checkpoint c;
  store_params(c, "g/", g_.params());
  store_params(c, "d/", d_.params());
  store_adam(c, "adam_g/", g_.params(), opt_g_);
  store_adam(c, "adam_d/", d_.params(), opt_d_);
  NamedTensor flm{"cond/avg_flm", {static_cast<int>(corpus_.avg_flm.size()), 2}, {}};
  for (const auto& p : corpus_.avg_flm.points) {
    flm.data.push_back(static_cast<float>(p.x));
    flm.data.push_back(static_cast<float>(p.y));
  }
  c.put(std::move(flm));
  c.put_u64("meta/step", static_cast<std::uint64_t>(step_));
  c.put_u64("meta/seed", config_.seed);
  c.config_json = core::config_to_json(config_);
  return c;
}

GanRun train_gan(const oracle::Corpus& corpus, const core::PipelineConfig& config,
                 const GanMode& mode, const TrainOptions& options) {
  GanTrainer trainer(config, corpus, mode);
  if (options.resume) trainer.restore(*options.resume);
  const std::int64_t total = options.steps < 0 ? config.gan.steps : options.steps;
  const int every = config.gan.checkpoint_every;
  GanRun run;
  std::string log = "step,d_loss,g_adv,g_fm,g_perc\n";
  while (trainer.steps_done() < total) {
    const auto r = trainer.step();
    run.losses.push_back(r);
    const std::string line = std::to_string(trainer.steps_done()) + "," + fmt(r.d_loss) + "," +
                             fmt(r.g_adv) + "," + fmt(r.g_fm) + "," + fmt(r.g_perc);
    log += line + "\n";
    if (options.log) options.log(line);
    if (!options.out_dir.empty() && every > 0 && trainer.steps_done() % every == 0) {
      save_checkpoint(trainer.checkpoint(), step_path(options.out_dir, trainer.steps_done()));
    }
  }
  run.final = trainer.checkpoint();
  if (!options.out_dir.empty()) {
    save_checkpoint(run.final, options.out_dir / "gan.anch");
    write_file(options.out_dir / "loss_log.csv", log);
  }
  return run;
}

}  // namespace anchor::train
