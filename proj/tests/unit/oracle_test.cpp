#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/oracle/corpus.hpp"
#include "anchor/oracle/image_io.hpp"
#include "anchor/oracle/render.hpp"
#include "anchor/oracle/viseme.hpp"
#include "temp_dir.hpp"

namespace anchor::oracle {
namespace {

using core::AUPSVector;
using testing::TempDir;

bool is_mouth_pixel(const std::vector<std::uint8_t>& rgb, std::size_t i, const RenderSpec& s) {
  const int dr = rgb[3 * i] - s.mouth.r, dg = rgb[3 * i + 1] - s.mouth.g,
            db = rgb[3 * i + 2] - s.mouth.b;
  return dr * dr + dg * dg + db * db < 40 * 40;
}

int mouth_pixels(const AUPSVector& v, const RenderSpec& s) {
  const auto rgb = render_face_rgb(v, s);
  int n = 0;
  for (std::size_t i = 0; i < rgb.size() / 3; ++i) n += is_mouth_pixel(rgb, i, s);
  return n;
}

TEST(Viseme, SameWordTwiceIsIdentical) {
  VisemeTable table(7, 4);
  const auto a = word_to_aups("anchor", table);
  const auto b = word_to_aups("anchor", table);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].flat(), b[i].flat());
}

TEST(Viseme, SentenceFrameCountIsWordsTimesFrames) {
  for (int f : {1, 4, 5}) {
    VisemeTable table(3, f);
    const auto tokens = text::tokenize("the quick brown fox");
    EXPECT_EQ(sentence_to_aups(tokens, table).size(), 4u * static_cast<std::size_t>(f));
  }
}

TEST(Viseme, MidpointFrameIsMeanOfAdjacentKeyframes) {
  // Five frames over three keyframes: frame 1 sits halfway between keyframes 0 and 1.
  VisemeTable table(11, 5);
  const auto keys = table.keyframes("hello");
  ASSERT_EQ(keys.size(), 3u);
  const auto frames = word_to_aups("hello", table);
  for (std::size_t d = 0; d < core::kAUPSDim; ++d) {
    EXPECT_NEAR(frames[1][d], 0.5 * (keys[0][d] + keys[1][d]), 1e-12);
    EXPECT_NEAR(frames[3][d], 0.5 * (keys[1][d] + keys[2][d]), 1e-12);
  }
  EXPECT_EQ(frames[0].flat(), keys[0].flat());
  EXPECT_EQ(frames[2].flat(), keys[1].flat());
  EXPECT_EQ(frames[4].flat(), keys[2].flat());
}

TEST(Viseme, UnknownWordsUseCanonicalPatterns) {
  VisemeTable table(7, 4);
  const auto& patterns = VisemeTable::canonical_patterns();
  for (const char* w : {"a", "zebra", "television", "x"}) {
    const int p = table.pattern_of(w);
    ASSERT_GE(p, 0);
    ASSERT_LT(p, kNumMouthPatterns);
    const auto keys = table.keyframes(w);
    ASSERT_EQ(keys.size(), patterns[p].size());
    for (std::size_t k = 0; k < keys.size(); ++k) EXPECT_EQ(keys[k].flat(), patterns[p][k].flat());
  }
}

TEST(Viseme, KeyframesAreNormalizedAndValid) {
  for (const auto& pattern : VisemeTable::canonical_patterns()) {
    for (const auto& k : pattern) {
      EXPECT_TRUE(k.normalized);
      EXPECT_NO_THROW(k.validate());
    }
  }
}

TEST(Viseme, ExplicitEntryOverridesHash) {
  VisemeTable table(7, 2);
  AUPSVector a = AUPSVector::zeros(true), b = AUPSVector::zeros(true);
  b.au[core::au::kJawDrop] = 1.0;
  table.set_entry("custom", {a, b});
  const auto frames = word_to_aups("custom", table);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[1].au[core::au::kJawDrop], 1.0);
  EXPECT_THROW(table.set_entry("raw", {AUPSVector::zeros(false)}), ContractError);
}

TEST(Render, NeutralFaceHasClosedMouth) {
  RenderSpec spec;
  EXPECT_EQ(mouth_pixels(AUPSVector::zeros(true), spec), 0);
}

TEST(Render, JawOpenStrictlyIncreasesMouthPixels) {
  RenderSpec spec;
  int previous = -1;
  for (double jaw : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    AUPSVector v = AUPSVector::zeros(true);
    v.au[core::au::kJawDrop] = jaw;
    const int n = mouth_pixels(v, spec);
    EXPECT_GT(n, previous) << "jaw=" << jaw;
    previous = n;
  }
}

TEST(Render, IdenticalInputsGiveIdenticalBytes) {
  RenderSpec spec;
  AUPSVector v = AUPSVector::zeros(true);
  v.au[core::au::kLipsPart] = 0.4;
  v.pose = {0.1, -0.2, 0.3};
  EXPECT_EQ(render_face_rgb(v, spec), render_face_rgb(v, spec));
}

TEST(Render, PoseMovesTheFace) {
  RenderSpec spec;
  AUPSVector v = AUPSVector::zeros(true);
  const auto neutral = render_face_rgb(v, spec);
  for (std::size_t j = 0; j < 3; ++j) {
    AUPSVector p = v;
    p.pose[j] = 0.3;
    EXPECT_NE(render_face_rgb(p, spec), neutral) << "pose dim " << j;
  }
}

TEST(Render, RejectsRawVectors) {
  RenderSpec spec;
  EXPECT_THROW(render_face(AUPSVector::zeros(false), spec), ContractError);
}

TEST(Render, FrameValuesInRange) {
  RenderSpec spec;
  AUPSVector v = AUPSVector::zeros(true);
  v.au.fill(1.0);
  v.pose = {1.0, -1.0, 1.0};
  const auto frame = render_face(v, spec);
  EXPECT_NO_THROW(frame.validate());
  EXPECT_EQ(frame.height(), 64);
  EXPECT_EQ(frame.width(), 64);
}

TEST(Landmarks, MouthLandmarksMoveMonotonicallyWithJaw) {
  RenderSpec spec;
  double prev_lower = -1.0, prev_jaw = -1.0, prev_gap = -1.0;
  for (int i = 0; i <= 10; ++i) {
    AUPSVector v = AUPSVector::zeros(true);
    v.au[core::au::kJawDrop] = i / 10.0;
    const auto lm = face_landmarks(v, spec);
    ASSERT_EQ(lm.size(), kFaceLandmarks);
    const double gap = lm.points[9].y - lm.points[8].y;
    EXPECT_GT(lm.points[9].y, prev_lower);
    EXPECT_GT(lm.points[10].y, prev_jaw);
    EXPECT_GT(gap, prev_gap);
    prev_lower = lm.points[9].y;
    prev_jaw = lm.points[10].y;
    prev_gap = gap;
  }
}

TEST(Landmarks, AlwaysInsideUnitSquare) {
  RenderSpec spec;
  core::Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    AUPSVector v = AUPSVector::zeros(true);
    for (auto& a : v.au) a = rng.uniform();
    for (auto& p : v.pose) p = rng.uniform(-1.0, 1.0);
    EXPECT_NO_THROW(face_landmarks(v, spec).validate());
  }
}

TEST(ImageIo, PngRoundTripIsExact) {
  TempDir dir("png");
  RenderSpec spec;
  AUPSVector v = AUPSVector::zeros(true);
  v.au[core::au::kJawDrop] = 0.7;
  const auto rgb = render_face_rgb(v, spec);
  write_png_rgb(dir / "a.png", rgb, spec.height, spec.width);
  const auto back = read_png(dir / "a.png");
  EXPECT_EQ(frame_to_rgb(back), rgb);
}

TEST(ImageIo, GifHasHeaderAndTrailer) {
  TempDir dir("gif");
  RenderSpec spec;
  std::vector<core::FrameImage> frames;
  for (int i = 0; i < 3; ++i) {
    AUPSVector v = AUPSVector::zeros(true);
    v.au[core::au::kJawDrop] = 0.3 * i;
    frames.push_back(render_face(v, spec));
  }
  write_gif(dir / "a.gif", frames);
  const std::string bytes = testing::slurp(dir / "a.gif");
  ASSERT_GT(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 6), "GIF89a");
  EXPECT_EQ(static_cast<unsigned char>(bytes.back()), 0x3B);
}

TEST(ImageIo, MissingPngIsFormatError) {
  EXPECT_THROW(read_png("/nonexistent/x.png"), FormatError);
}

core::PipelineConfig small_config() {
  core::PipelineConfig c;
  c.oracle.frames_per_word = 4;
  c.oracle.seed = 21;
  return c;
}

TEST(Corpus, ThreeWordSentenceGivesTwelveFrames) {
  TempDir dir("corpus");
  const auto m = generate_corpus({"one two three"}, small_config(), dir.path());
  ASSERT_EQ(m.samples.size(), 1u);
  EXPECT_EQ(m.samples[0].num_frames, 12);
  const auto aups = read_aups_csv(dir / "samples/s0000/aups.csv");
  EXPECT_EQ(aups.size(), 12u);
  int pngs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "samples/s0000/frames")) {
    pngs += e.path().extension() == ".png";
  }
  EXPECT_EQ(pngs, 12);
}

TEST(Corpus, ManifestCountMatchesSentences) {
  TempDir dir("corpus");
  const std::vector<std::string> sentences = {"a b", "hello there", "good night moon"};
  generate_corpus(sentences, small_config(), dir.path());
  const auto m = read_manifest(dir / "manifest.json");
  ASSERT_EQ(m.samples.size(), sentences.size());
  EXPECT_EQ(m.corpus_seed, 21u);
  for (std::size_t i = 0; i < sentences.size(); ++i) EXPECT_EQ(m.samples[i].text, sentences[i]);
}

TEST(Corpus, RegenerationIsByteIdentical) {
  TempDir a("corpus"), b("corpus");
  const std::vector<std::string> sentences = {"the cat sat", "on the mat"};
  generate_corpus(sentences, small_config(), a.path());
  generate_corpus(sentences, small_config(), b.path());
  std::string diff;
  EXPECT_TRUE(testing::trees_identical(a.path(), b.path(), &diff)) << diff;
}

TEST(Corpus, DifferentSeedChangesData) {
  TempDir a("corpus"), b("corpus");
  auto c = small_config();
  generate_corpus({"the cat sat on the mat"}, c, a.path());
  c.oracle.seed = 22;
  generate_corpus({"the cat sat on the mat"}, c, b.path());
  EXPECT_NE(testing::slurp(a / "samples/s0000/aups.csv"),
            testing::slurp(b / "samples/s0000/aups.csv"));
}

TEST(Corpus, LoadMatchesOracle) {
  TempDir dir("corpus");
  const auto config = small_config();
  generate_corpus({"speak softly"}, config, dir.path());
  const auto corpus = load_corpus(dir.path());
  ASSERT_EQ(corpus.samples.size(), 1u);
  const auto& s = corpus.samples[0];
  const VisemeTable table(config.oracle.seed, config.oracle.frames_per_word);
  const auto expected = sentence_to_aups(text::tokenize("speak softly"), table);
  ASSERT_EQ(s.aups_seq.size(), expected.size());
  for (std::size_t f = 0; f < expected.size(); ++f) {
    for (std::size_t d = 0; d < core::kAUPSDim; ++d) {
      EXPECT_NEAR(s.aups_seq[f][d], expected[f][d], 1e-6);
    }
    EXPECT_EQ(frame_to_rgb(s.frames[f]), render_face_rgb(expected[f], render_spec_for(config)));
  }
}

TEST(Corpus, CsvValuesHaveSixDecimals) {
  TempDir dir("corpus");
  generate_corpus({"alpha beta"}, small_config(), dir.path());
  std::ifstream in(dir / "samples/s0000/flm.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header.substr(0, 12), "frame,x0,y0,");
  std::stringstream ss(row);
  std::string field;
  std::getline(ss, field, ',');
  EXPECT_EQ(field, "0");
  while (std::getline(ss, field, ',')) {
    const auto dot = field.find('.');
    ASSERT_NE(dot, std::string::npos) << field;
    EXPECT_EQ(field.size() - dot - 1, 6u) << field;
  }
}

// Independent recomputation: parse every flm.csv with a stream parser, sum in
// long double, and compare with avg_flm.csv.
TEST(Corpus, AverageLandmarksMatchBruteForceMean) {
  TempDir dir("corpus");
  const std::vector<std::string> sentences = {"one two", "three four five", "six"};
  const auto m = generate_corpus(sentences, small_config(), dir.path());
  std::vector<long double> sums(2 * kFaceLandmarks, 0.0L);
  long rows = 0;
  for (const auto& s : m.samples) {
    std::ifstream in(dir.path() / "samples" / s.id / "flm.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string field;
      std::getline(ss, field, ',');
      for (std::size_t k = 0; k < sums.size(); ++k) {
        std::getline(ss, field, ',');
        sums[k] += std::stold(field);
      }
      ++rows;
    }
  }
  ASSERT_EQ(rows, 4 * 6);
  std::ifstream in(dir / "avg_flm.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::stringstream ss(line);
  std::string field;
  for (std::size_t k = 0; k < sums.size(); ++k) {
    ASSERT_TRUE(std::getline(ss, field, ','));
    EXPECT_NEAR(std::stod(field), static_cast<double>(sums[k] / rows), 1e-6) << "column " << k;
  }
}

TEST(Corpus, EmptySentenceListRejected) {
  TempDir dir("corpus");
  EXPECT_THROW(generate_corpus({}, small_config(), dir.path()), EmptyInputError);
}

TEST(Corpus, UnwritableDirectoryIsIoError) {
  EXPECT_THROW(generate_corpus({"a"}, small_config(), "/proc/anchor-no-write"), IoError);
}

TEST(Corpus, TruncatedAupsCsvIsRejected) {
  TempDir dir("corpus");
  generate_corpus({"alpha beta"}, small_config(), dir.path());
  std::ofstream(dir / "samples/s0000/aups.csv", std::ios::app) << "8,1,2\n";
  EXPECT_THROW(load_corpus(dir.path()), FormatError);
}

TEST(Corpus, FrameCountMismatchIsDataError) {
  TempDir dir("corpus");
  generate_corpus({"alpha beta"}, small_config(), dir.path());
  std::filesystem::remove(dir / "samples/s0000/frames/00007.png");
  EXPECT_THROW(load_corpus(dir.path()), DataError);
}

TEST(Corpus, SentencesFileSkipsBlankLines) {
  TempDir dir("sent");
  std::ofstream(dir / "s.txt") << "first line\n\n  \nsecond line\r\n";
  const auto s = read_sentences_file(dir / "s.txt");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1], "second line");
}

}  // namespace
}  // namespace anchor::oracle
