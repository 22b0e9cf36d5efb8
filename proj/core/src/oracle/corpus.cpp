#include "anchor/oracle/corpus.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "anchor/core/errors.hpp"
#include "anchor/oracle/image_io.hpp"
#include "json.hpp"

namespace anchor::oracle {
namespace fs = std::filesystem;
using core::AUPSVector;
using core::LandmarkSet;

namespace {

std::string format6(double v) {
  v = quantize6(v);
  if (v == 0.0) v = 0.0;  // no "-0.000000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing corpus file " + path.string());
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

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = line.find(',', pos);
    out.push_back(line.substr(pos, end == std::string_view::npos ? end : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

double parse_double(std::string_view field, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw FormatError(path.string() + ": not a decimal number '" + std::string(field) + "'", line);
  }
  return v;
}

// Parses a CSV with an exact expected header. Returns numeric rows.
std::vector<std::vector<double>> read_numeric_csv(const fs::path& path,
                                                  const std::string& expected_header) {
  const auto lines = split_lines(read_text(path));
  if (lines.empty() || lines[0] != expected_header) {
    throw FormatError(path.string() + ": header must be '" + expected_header + "'", 1);
  }
  const std::size_t cols = split_commas(expected_header).size();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_commas(lines[i]);
    if (fields.size() != cols) {
      throw FormatError(path.string() + ": expected " + std::to_string(cols) + " fields, got " +
                            std::to_string(fields.size()),
                        i + 1);
    }
    std::vector<double> row;
    row.reserve(cols);
    for (auto f : fields) row.push_back(parse_double(f, path, i + 1));
    rows.push_back(std::move(row));
  }
  return rows;
}

void check_frame_column(const std::vector<std::vector<double>>& rows, const fs::path& path) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][0] != static_cast<double>(i)) {
      throw FormatError(path.string() + ": frame column must count from 0", i + 2);
    }
  }
}

std::string aups_header() {
  std::string h = "frame";
  for (auto n : core::kAUNames) h += "," + std::string(n);
  for (auto n : core::kPoseNames) h += "," + std::string(n);
  return h;
}

std::string landmark_columns(std::size_t count) {
  std::string h;
  for (std::size_t k = 0; k < count; ++k) {
    if (k) h += ",";
    h += "x" + std::to_string(k) + ",y" + std::to_string(k);
  }
  return h;
}

std::string landmark_row(const LandmarkSet& s) {
  std::string row;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k) row += ",";
    row += format6(s.points[k].x) + "," + format6(s.points[k].y);
  }
  return row;
}

LandmarkSet quantized(LandmarkSet s) {
  for (auto& p : s.points) {
    p.x = quantize6(p.x);
    p.y = quantize6(p.y);
  }
  return s;
}

LandmarkSet landmarks_from_row(std::span<const double> values) {
  LandmarkSet s;
  for (std::size_t k = 0; k + 1 < values.size(); k += 2) s.points.push_back({values[k], values[k + 1]});
  return s;
}

std::string sample_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%04zu", i);
  return buf;
}

fs::path frame_path(const fs::path& sample_dir, std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.png", frame);
  return sample_dir / "frames" / buf;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

RenderSpec render_spec_for(const core::PipelineConfig& config) {
  RenderSpec spec;
  spec.height = config.image_h;
  spec.width = config.image_w;
  return spec;
}

void write_aups_csv(const fs::path& path, const std::vector<AUPSVector>& seq) {
  std::string out = aups_header() + "\n";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const AUPSVector raw = seq[i].normalized ? core::denormalize_aups(seq[i]) : seq[i];
    out += std::to_string(i);
    for (double v : raw.flat()) out += "," + format6(v);
    out += "\n";
  }
  write_text(path, out);
}

std::vector<AUPSVector> read_aups_csv(const fs::path& path) {
  const auto rows = read_numeric_csv(path, aups_header());
  check_frame_column(rows, path);
  std::vector<AUPSVector> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(AUPSVector::from_flat(std::span(rows[i]).subspan(1), false));
    } catch (const RangeError& e) {
      throw FormatError(path.string() + ": " + e.what(), i + 2);
    }
  }
  return out;
}

std::vector<LandmarkSet> read_flm_csv(const fs::path& path, std::size_t num_landmarks) {
  const auto rows = read_numeric_csv(path, "frame," + landmark_columns(num_landmarks));
  check_frame_column(rows, path);
  std::vector<LandmarkSet> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back(landmarks_from_row(std::span(rows[i]).subspan(1)));
    try {
      out.back().validate();
    } catch (const RangeError& e) {
      throw FormatError(path.string() + ": " + e.what(), i + 2);
    }
  }
  return out;
}

LandmarkSet read_avg_flm_csv(const fs::path& path, std::size_t num_landmarks) {
  const auto rows = read_numeric_csv(path, landmark_columns(num_landmarks));
  if (rows.size() != 1) throw FormatError(path.string() + ": expected exactly one data row");
  LandmarkSet s = landmarks_from_row(rows[0]);
  s.validate();
  return s;
}

Manifest read_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
    Manifest m;
    m.corpus_seed = j.at("corpus_seed").get<std::uint64_t>();
    m.config_json = j.at("config").dump(2);
    for (const auto& s : j.at("samples")) {
      m.samples.push_back({s.at("id").get<std::string>(), s.at("text").get<std::string>(),
                           s.at("num_frames").get<int>()});
    }
    if (m.samples.empty()) throw DataError(path.string() + ": manifest lists no samples");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }
}

Manifest generate_corpus(const std::vector<std::string>& sentences,
                         const core::PipelineConfig& config, const fs::path& out_dir) {
  config.validate();
  if (sentences.empty()) throw EmptyInputError("generate_corpus needs at least one sentence");
  if (config.num_landmarks != static_cast<int>(kFaceLandmarks)) {
    throw ConfigError("the synthetic face has " + std::to_string(kFaceLandmarks) + " landmarks");
  }
  const VisemeTable table(config.oracle.seed, config.oracle.frames_per_word);
  const RenderSpec spec = render_spec_for(config);
  make_dirs(out_dir / "samples");

  Manifest manifest;
  manifest.corpus_seed = config.oracle.seed;
  manifest.config_json = core::config_to_json(config);
  std::vector<LandmarkSet> all_landmarks;
  const std::string flm_header = "frame," + landmark_columns(kFaceLandmarks) + "\n";
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto tokens = text::tokenize(sentences[i]);
    const auto aups = sentence_to_aups(tokens, table);
    const std::string id = sample_id(i);
    const fs::path dir = out_dir / "samples" / id;
    make_dirs(dir / "frames");
    write_aups_csv(dir / "aups.csv", aups);

    std::string flm = flm_header;
    for (std::size_t f = 0; f < aups.size(); ++f) {
      const LandmarkSet lm = quantized(face_landmarks(aups[f], spec));
      flm += std::to_string(f) + "," + landmark_row(lm) + "\n";
      all_landmarks.push_back(lm);
      const auto rgb = render_face_rgb(aups[f], spec);
      write_png_rgb(frame_path(dir, f), rgb, spec.height, spec.width);
    }
    write_text(dir / "flm.csv", flm);
    manifest.samples.push_back({id, sentences[i], static_cast<int>(aups.size())});
  }

  const LandmarkSet avg = core::average_landmarks(all_landmarks);
  write_text(out_dir / "avg_flm.csv",
             landmark_columns(kFaceLandmarks) + "\n" + landmark_row(avg) + "\n");

  nlohmann::ordered_json j;
  j["corpus_seed"] = manifest.corpus_seed;
  j["config"] = nlohmann::ordered_json::parse(manifest.config_json);
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : manifest.samples) {
    j["samples"].push_back({{"id", s.id}, {"text", s.text}, {"num_frames", s.num_frames}});
  }
  write_text(out_dir / "manifest.json", j.dump(2) + "\n");
  return manifest;
}

Corpus load_corpus(const fs::path& dir, bool load_frames) {
  Corpus c;
  c.root = dir;
  c.manifest = read_manifest(dir / "manifest.json");
  try {
    c.config = core::config_from_json(c.manifest.config_json);
  } catch (const ConfigError& e) {
    throw DataError(std::string("corpus config echo is invalid: ") + e.what());
  }
  const auto count = static_cast<std::size_t>(c.config.num_landmarks);
  c.avg_flm = read_avg_flm_csv(dir / "avg_flm.csv", count);
  for (const auto& entry : c.manifest.samples) {
    const fs::path sdir = dir / "samples" / entry.id;
    core::SampleRecord rec;
    rec.id = entry.id;
    rec.text = entry.text;
    for (const auto& raw : read_aups_csv(sdir / "aups.csv")) {
      rec.aups_seq.push_back(core::normalize_aups(raw));
    }
    if (static_cast<int>(rec.aups_seq.size()) != entry.num_frames || entry.num_frames < 1) {
      throw DataError("sample " + entry.id + ": manifest says " + std::to_string(entry.num_frames) +
                      " frames, aups.csv has " + std::to_string(rec.aups_seq.size()));
    }
    auto lms = read_flm_csv(sdir / "flm.csv", count);
    if (lms.size() != rec.aups_seq.size()) {
      throw DataError("sample " + entry.id + ": flm.csv row count differs from aups.csv");
    }
    if (load_frames) {
      for (std::size_t f = 0; f < rec.aups_seq.size(); ++f) {
        const fs::path p = frame_path(sdir, f);
        if (!fs::exists(p)) throw DataError("sample " + entry.id + ": missing " + p.string());
        auto frame = read_png(p);
        if (frame.height() != c.config.image_h || frame.width() != c.config.image_w) {
          throw DataError("sample " + entry.id + ": frame " + std::to_string(f) +
                          " has the wrong size");
        }
        rec.frames.push_back(std::move(frame));
      }
    }
    rec.validate(load_frames);
    c.samples.push_back(std::move(rec));
    c.landmarks.push_back(std::move(lms));
  }
  return c;
}

std::vector<std::string> read_sentences_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sentences file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  if (out.empty()) throw EmptyInputError("sentences file " + path.string() + " is empty");
  return out;
}

}  // namespace anchor::oracle
