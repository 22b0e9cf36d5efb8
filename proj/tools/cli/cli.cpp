#include "cli.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "anchor/core/config.hpp"
#include "anchor/core/errors.hpp"
#include "anchor/oracle/corpus.hpp"
#include "anchor/oracle/image_io.hpp"
#include "anchor/train/checkpoint.hpp"
#include "anchor/train/metrics.hpp"
#include "anchor/train/pipeline.hpp"
#include "anchor/train/trainers.hpp"

namespace anchor::cli {
namespace {

namespace fs = std::filesystem;

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(source + " is not an unsigned integer: '" + text + "'");
  }
  return v;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

// Options shared by every subcommand that resolves a configuration.
struct Common {
  std::string config_file;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "JSON config overlay (flags win over it)");
  cmd->add_option("--seed", c.seed, "global seed");
}

// default (or corpus) < ANCHORPIPE_SEED < --config file < flags
core::PipelineConfig resolve(core::PipelineConfig base, const Common& c, bool corpus_seed) {
  if (const char* env = std::getenv("ANCHORPIPE_SEED")) {
    const auto v = parse_seed(env, "ANCHORPIPE_SEED");
    base.seed = v;
    if (corpus_seed) base.oracle.seed = v;
  }
  if (!c.config_file.empty()) base = core::merge_config(base, read_text(c.config_file));
  if (c.seed) {
    base.seed = *c.seed;
    if (corpus_seed) base.oracle.seed = *c.seed;
  }
  base.validate();
  return base;
}

std::function<void(const std::string&)> step_logger(std::ostream& out, int every) {
  if (every <= 0) return {};
  return [&out, every, n = 0](const std::string& line) mutable {
    if (++n % every == 0) out << line << '\n';
  };
}

struct GenData {
  Common common;
  std::string sentences, out;
};

int gen_data(const GenData& o, std::ostream& out) {
  const auto config = resolve(core::PipelineConfig{}, o.common, true);
  const auto sentences = oracle::read_sentences_file(o.sentences);
  make_out_dir(o.out);
  const auto manifest = oracle::generate_corpus(sentences, config, o.out);
  write_text(fs::path(o.out) / "config.json", core::config_to_json(config));
  out << "wrote " << manifest.samples.size() << " samples to " << o.out << '\n';
  return 0;
}

struct TrainSeq2AU {
  Common common;
  std::string corpus, out, resume;
  std::optional<int> steps;
  int log_every = 100;
};

int train_seq2au(const TrainSeq2AU& o, std::ostream& out) {
  const auto corpus = oracle::load_corpus(o.corpus, false);
  auto config = resolve(corpus.config, o.common, false);
  if (o.steps) config.seq2au.steps = *o.steps;
  config.validate();
  make_out_dir(o.out);
  write_text(fs::path(o.out) / "config.json", core::config_to_json(config));
  std::optional<train::Checkpoint> resume;
  if (!o.resume.empty()) resume = train::load_checkpoint(o.resume);
  const auto run = train::train_seq2au(
      corpus, config,
      {.out_dir = o.out, .resume = resume ? &*resume : nullptr, .log = step_logger(out, o.log_every)});
  if (!run.losses.empty()) {
    out << "final mse=" << run.losses.back().mse << " stop_bce=" << run.losses.back().stop_bce << '\n';
  }
  return 0;
}

struct TrainGan {
  Common common;
  std::string corpus, out, resume, seq2au;
  std::optional<int> steps;
  bool gt_aups = false;
  int log_every = 100;
};

int train_gan(const TrainGan& o, std::ostream& out) {
  if (!o.gt_aups && o.seq2au.empty()) {
    throw ConfigError("train-gan needs --gt-aups or --seq2au CKPT");
  }
  const auto corpus = oracle::load_corpus(o.corpus, true);
  auto config = resolve(corpus.config, o.common, false);
  if (o.steps) config.gan.steps = *o.steps;
  config.validate();
  std::optional<train::Seq2AUBundle> s2a;
  if (!o.gt_aups) s2a = train::load_seq2au(train::load_checkpoint(o.seq2au));
  make_out_dir(o.out);
  write_text(fs::path(o.out) / "config.json", core::config_to_json(config));
  std::optional<train::Checkpoint> resume;
  if (!o.resume.empty()) resume = train::load_checkpoint(o.resume);
  const auto run = train::train_gan(
      corpus, config, {.gt_aups = o.gt_aups, .seq2au = s2a ? &*s2a : nullptr},
      {.out_dir = o.out, .resume = resume ? &*resume : nullptr, .log = step_logger(out, o.log_every)});
  if (!run.losses.empty()) out << "final g_perc=" << run.losses.back().g_perc << '\n';
  return 0;
}

struct Synth {
  std::string text, seq2au, gan, out;
  bool gif = false;
};

int synth(const Synth& o, std::ostream& out) {
  const auto s2a = train::load_seq2au(train::load_checkpoint(o.seq2au));
  const auto gan = train::load_gan(train::load_checkpoint(o.gan));
  const auto aups = train::predict_aups(s2a, o.text);
  if (aups.empty()) throw EvaluationError("seq2au produced no frames");
  const auto frames = train::synthesize_frames(gan, aups);
  const fs::path dir(o.out);
  make_out_dir(dir / "frames");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    char name[16];
    std::snprintf(name, sizeof name, "%05zu.png", t);
    oracle::write_png(dir / "frames" / name, frames[t]);
  }
  oracle::write_aups_csv(dir / "aups.csv", aups);
  if (o.gif) oracle::write_gif(dir / "anim.gif", frames);
  write_text(dir / "config.json", core::config_to_json(gan.config));
  out << "wrote " << frames.size() << " frames to " << o.out << '\n';
  return 0;
}

struct Eval {
  std::string corpus, seq2au, gan, out;
  bool gt_aups = false, gt_frames = false;
};

int eval(const Eval& o, std::ostream& out) {
  if (!o.gt_aups && o.seq2au.empty()) throw ConfigError("eval needs --seq2au CKPT or --gt-aups");
  if (!o.gt_frames && o.gan.empty()) throw ConfigError("eval needs --gan CKPT or --gt-frames");
  const auto corpus = oracle::load_corpus(o.corpus, true);
  std::optional<train::Seq2AUBundle> s2a;
  std::optional<train::GanBundle> gan;
  if (!o.gt_aups) s2a = train::load_seq2au(train::load_checkpoint(o.seq2au));
  if (!o.gt_frames) gan = train::load_gan(train::load_checkpoint(o.gan));
  const auto report = train::evaluate(s2a ? &*s2a : nullptr, gan ? &*gan : nullptr, corpus,
                                      {.gt_aups = o.gt_aups, .gt_frames = o.gt_frames});
  const fs::path path(o.out);
  if (path.has_parent_path()) make_out_dir(path.parent_path());
  train::write_report(report, path);
  const auto& config = gan ? gan->config : s2a ? s2a->config : corpus.config;
  write_text(fs::path(path.string() + ".config.json"), core::config_to_json(config));
  out << train::report_text(report);
  return 0;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return 1;
    case ErrorKind::kData: return 2;
    case ErrorKind::kRuntime: return 3;
  }
  return 3;
}

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kData: return "data";
    case ErrorKind::kRuntime: return "runtime";
  }
  return "runtime";
}

void report_error(std::ostream& err, const char* kind, std::string msg) {
  for (char& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  err << "anchorpipe: error[" << kind << "]: " << msg << std::endl;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text-driven talking-face pipeline", "anchorpipe"};
  app.require_subcommand(1);

  GenData gd;
  auto* gen = app.add_subcommand("gen-data", "render a synthetic oracle corpus");
  gen->add_option("--sentences", gd.sentences, "one sentence per line")->required();
  gen->add_option("--out", gd.out, "corpus directory")->required();
  add_common(gen, gd.common);

  TrainSeq2AU ts;
  auto* t1 = app.add_subcommand("train-seq2au", "train the text-to-AU+PS model");
  t1->add_option("--corpus", ts.corpus)->required();
  t1->add_option("--out", ts.out)->required();
  t1->add_option("--steps", ts.steps)->check(CLI::NonNegativeNumber);
  t1->add_option("--resume", ts.resume, "continue from a checkpoint");
  t1->add_option("--log-every", ts.log_every, "print every Nth loss line (0: quiet)");
  add_common(t1, ts.common);

  TrainGan tg;
  auto* t2 = app.add_subcommand("train-gan", "train the face generator");
  t2->add_option("--corpus", tg.corpus)->required();
  t2->add_option("--out", tg.out)->required();
  t2->add_option("--steps", tg.steps)->check(CLI::NonNegativeNumber);
  t2->add_flag("--gt-aups", tg.gt_aups, "condition on the corpus AU+PS");
  t2->add_option("--seq2au", tg.seq2au, "condition on this model's predictions");
  t2->add_option("--resume", tg.resume, "continue from a checkpoint");
  t2->add_option("--log-every", tg.log_every, "print every Nth loss line (0: quiet)");
  add_common(t2, tg.common);

  Synth sy;
  auto* s = app.add_subcommand("synth", "text to frames");
  s->add_option("--text", sy.text)->required();
  s->add_option("--seq2au", sy.seq2au)->required();
  s->add_option("--gan", sy.gan)->required();
  s->add_option("--out", sy.out)->required();
  s->add_flag("--gif", sy.gif, "also write anim.gif");

  Eval ev;
  auto* e = app.add_subcommand("eval", "score against a corpus");
  e->add_option("--corpus", ev.corpus)->required();
  e->add_option("--seq2au", ev.seq2au);
  e->add_option("--gan", ev.gan);
  e->add_option("--out", ev.out, "report path")->required();
  e->add_flag("--gt-aups", ev.gt_aups, "use corpus AU+PS instead of seq2au");
  e->add_flag("--gt-frames", ev.gt_frames, "use corpus frames instead of the generator");

  std::vector<const char*> argv{"anchorpipe"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    report_error(err, "usage", ex.what());
    return 1;
  }

  try {
    if (gen->parsed()) return gen_data(gd, out);
    if (t1->parsed()) return train_seq2au(ts, out);
    if (t2->parsed()) return train_gan(tg, out);
    if (s->parsed()) return synth(sy, out);
    if (e->parsed()) return eval(ev, out);
  } catch (const Error& ex) {
    report_error(err, kind_name(ex.kind()), ex.what());
    return exit_code(ex.kind());
  } catch (const fs::filesystem_error& ex) {
    report_error(err, "runtime", ex.what());
    return 3;
  } catch (const std::exception& ex) {
    report_error(err, "runtime", ex.what());
    return 3;
  }
  report_error(err, "usage", "no subcommand");
  return 1;
}

}  // namespace anchor::cli
