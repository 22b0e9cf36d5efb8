#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "anchor/core/config.hpp"
#include "anchor/core/types.hpp"
#include "anchor/oracle/render.hpp"
#include "anchor/oracle/viseme.hpp"

namespace anchor::oracle {

struct ManifestEntry {
  std::string id;
  std::string text;
  int num_frames = 0;
};

struct Manifest {
  std::uint64_t corpus_seed = 0;
  std::string config_json;  // echo of the generating PipelineConfig
  std::vector<ManifestEntry> samples;
};

// In-memory corpus. AU+PS are normalized; frames are in [-1, 1].
struct Corpus {
  std::filesystem::path root;
  Manifest manifest;
  core::PipelineConfig config;
  std::vector<core::SampleRecord> samples;
  std::vector<std::vector<core::LandmarkSet>> landmarks;  // per sample, per frame
  core::LandmarkSet avg_flm;
};

RenderSpec render_spec_for(const core::PipelineConfig& config);

// Writes manifest.json, avg_flm.csv and samples/<id>/{aups.csv, flm.csv,
// frames/%05d.png} under out_dir. Output bytes depend only on (config, sentences).
Manifest generate_corpus(const std::vector<std::string>& sentences,
                         const core::PipelineConfig& config,
                         const std::filesystem::path& out_dir);

// Reads and validates a corpus directory. Throws DataError / FormatError.
Corpus load_corpus(const std::filesystem::path& dir, bool load_frames = true);

// Format validators for the on-disk files.
std::vector<core::AUPSVector> read_aups_csv(const std::filesystem::path& path);
void write_aups_csv(const std::filesystem::path& path, const std::vector<core::AUPSVector>& seq);
std::vector<core::LandmarkSet> read_flm_csv(const std::filesystem::path& path,
                                            std::size_t num_landmarks);
core::LandmarkSet read_avg_flm_csv(const std::filesystem::path& path, std::size_t num_landmarks);
Manifest read_manifest(const std::filesystem::path& path);

// Value as written to disk: 6 fractional digits.
double quantize6(double v);

std::vector<std::string> read_sentences_file(const std::filesystem::path& path);

}  // namespace anchor::oracle
