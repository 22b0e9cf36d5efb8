#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "anchor/core/config.hpp"
#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/core/types.hpp"

namespace anchor::core {
namespace {

AUPSVector random_raw(Rng& rng) {
  AUPSVector v;
  for (auto& a : v.au) a = rng.uniform(0.0, kMaxAUIntensity);
  for (auto& p : v.pose) p = rng.uniform(-kMaxPoseRadians, kMaxPoseRadians);
  return v;
}

TEST(NormalizeAups, MaxIntensityMapsToOne) {
  AUPSVector v;
  v.au[3] = 5.0;
  EXPECT_EQ(normalize_aups(v).au[3], 1.0);
}

TEST(NormalizeAups, ZeroVectorStaysZero) {
  const auto n = normalize_aups(AUPSVector::zeros(false));
  EXPECT_TRUE(n.normalized);
  for (double x : n.flat()) EXPECT_EQ(x, 0.0);
}

TEST(NormalizeAups, PoseDividesByHalfPi) {
  AUPSVector v;
  v.pose = {std::numbers::pi / 4.0, 0.0, -std::numbers::pi / 2.0};
  const auto n = normalize_aups(v);
  EXPECT_NEAR(n.pose[0], 0.5, 1e-12);
  EXPECT_EQ(n.pose[1], 0.0);
  EXPECT_NEAR(n.pose[2], -1.0, 1e-12);
}

TEST(NormalizeAups, OutOfRangeNamesComponent) {
  AUPSVector v;
  v.au[7] = 5.5;
  try {
    normalize_aups(v);
    FAIL() << "expected RangeError";
  } catch (const RangeError& e) {
    EXPECT_EQ(e.component(), 7u);
  }
  AUPSVector p;
  p.pose[2] = 2.0;
  try {
    normalize_aups(p);
    FAIL() << "expected RangeError";
  } catch (const RangeError& e) {
    EXPECT_EQ(e.component(), 19u);
  }
}

TEST(NormalizeAups, RejectsAlreadyNormalized) {
  EXPECT_THROW(normalize_aups(AUPSVector::zeros(true)), ContractError);
  EXPECT_THROW(denormalize_aups(AUPSVector::zeros(false)), ContractError);
}

TEST(DenormalizeAups, BoundaryAndInterior) {
  AUPSVector n = AUPSVector::zeros(true);
  n.au[0] = 1.0;
  n.au[1] = 0.2;
  const auto r = denormalize_aups(n);
  EXPECT_EQ(r.au[0], 5.0);
  EXPECT_NEAR(r.au[1], 1.0, 1e-12);
  EXPECT_FALSE(r.normalized);
}

TEST(DenormalizeAups, RoundTripOnRandomVectors) {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const AUPSVector v = random_raw(rng);
    const AUPSVector back = denormalize_aups(normalize_aups(v));
    for (std::size_t i = 0; i < kAUPSDim; ++i) ASSERT_NEAR(back[i], v[i], 1e-6) << i;
  }
}

TEST(AUPSVector, RandomConstructionSatisfiesRanges) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const AUPSVector raw = random_raw(rng);
    EXPECT_NO_THROW(raw.validate());
    const AUPSVector n = normalize_aups(raw);
    for (double a : n.au) EXPECT_TRUE(a >= 0.0 && a <= 1.0);
    for (double p : n.pose) EXPECT_TRUE(p >= -1.0 && p <= 1.0);
    EXPECT_EQ(n.flat().size(), 20u);
  }
}

TEST(AUPSVector, FromFlatChecksLength) {
  std::vector<double> v(19, 0.0);
  EXPECT_THROW(AUPSVector::from_flat(v, true), ShapeError);
  v.push_back(0.5);
  EXPECT_EQ(AUPSVector::from_flat(v, true).pose[2], 0.5);
}

TEST(LandmarkSet, RandomConstructionSatisfiesRanges) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    LandmarkSet s;
    for (int k = 0; k < 12; ++k) s.points.push_back({rng.uniform(), rng.uniform()});
    EXPECT_NO_THROW(s.validate());
  }
  LandmarkSet bad{{{0.5, 1.2}}};
  EXPECT_THROW(bad.validate(), RangeError);
}

TEST(FrameImage, RangeAndShape) {
  FrameImage img(4, 5, 0.25f);
  EXPECT_EQ(img.size(), 60u);
  EXPECT_NO_THROW(img.validate());
  img.at(2, 3, 4) = 1.5f;
  EXPECT_THROW(img.validate(), RangeError);
  EXPECT_THROW(FrameImage(2, 2, std::vector<float>(11)), ShapeError);
}

TEST(SampleRecord, LengthsMustAgree) {
  SampleRecord r;
  r.id = "s";
  EXPECT_THROW(r.validate(), EmptyInputError);
  r.aups_seq.push_back(AUPSVector::zeros(true));
  EXPECT_THROW(r.validate(), ShapeError);
  r.frames.emplace_back(2, 2);
  EXPECT_NO_THROW(r.validate());
}

TEST(AverageLandmarks, SingleSetIsIdentity) {
  LandmarkSet s{{{0.1, 0.2}, {0.7, 0.9}}};
  std::vector<LandmarkSet> sets{s};
  EXPECT_EQ(average_landmarks(sets), s);
}

TEST(AverageLandmarks, HandMean) {
  std::vector<LandmarkSet> sets{LandmarkSet{{{0.2, 0.4}}}, LandmarkSet{{{0.6, 0.8}}}};
  const auto avg = average_landmarks(sets);
  EXPECT_NEAR(avg.points[0].x, 0.4, 1e-12);
  EXPECT_NEAR(avg.points[0].y, 0.6, 1e-12);
}

TEST(AverageLandmarks, PermutationInvariantExactly) {
  Rng rng(11);
  std::vector<LandmarkSet> sets(37);
  for (auto& s : sets) {
    for (int k = 0; k < 12; ++k) s.points.push_back({rng.uniform(), rng.uniform()});
  }
  const auto reference = average_landmarks(sets);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = sets.size() - 1; i > 0; --i) {
      std::swap(sets[i], sets[rng.below(i + 1)]);
    }
    EXPECT_EQ(average_landmarks(sets), reference);
  }
}

TEST(AverageLandmarks, Errors) {
  std::vector<LandmarkSet> none;
  EXPECT_THROW(average_landmarks(none), EmptyInputError);
  std::vector<LandmarkSet> mismatched{LandmarkSet{{{0.1, 0.1}}},
                                      LandmarkSet{{{0.1, 0.1}, {0.2, 0.2}}}};
  EXPECT_THROW(average_landmarks(mismatched), ShapeError);
}

TEST(PipelineConfig, DefaultsAndJsonRoundTrip) {
  PipelineConfig c;
  EXPECT_EQ(c.n_prior, 2);
  EXPECT_EQ(c.embed_dim, 200);
  EXPECT_EQ(c.gan.lambda_fm, 10.0);
  EXPECT_EQ(c.gan.lambda_perc, 10.0);
  const PipelineConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(PipelineConfig, MergeRejectsUnknownAndInvalid) {
  PipelineConfig c;
  EXPECT_EQ(merge_config(c, R"({"n_prior": 3, "gan": {"ngf": 8}})").gan.ngf, 8);
  EXPECT_THROW(merge_config(c, R"({"nprior": 3})"), ConfigError);
  EXPECT_THROW(merge_config(c, R"({"gan": {"lambda_fm": -1}})"), ConfigError);
  EXPECT_THROW(merge_config(c, R"({"seq2au": {"t_max": 0}})"), ConfigError);
  EXPECT_THROW(merge_config(c, "not json"), ConfigError);
}

}  // namespace
}  // namespace anchor::core
