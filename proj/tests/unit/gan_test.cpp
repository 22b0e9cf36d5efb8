#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "anchor/cond/stack.hpp"
#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/gan/losses.hpp"
#include "anchor/nn/adam.hpp"
#include "anchor/nn/ops.hpp"
#include "gradcheck.hpp"

namespace anchor::gan {
namespace {

core::GanConfig tiny_gan() {
  core::GanConfig c;
  c.ngf = 4;
  c.ndf = 4;
  c.n_res = 1;
  c.n_down = 2;
  return c;
}

nn::Tensor<double> random_tensor(core::Rng& rng, nn::Shape shape, double lo = -1, double hi = 1) {
  nn::Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Tiny setup: n_prior = 1 -> 20*2 + 1 + 3 = 44 stack channels, 8x8 images.
constexpr int kPrior = 1;
const int kStack = cond::stack_channels(kPrior);

WindowBatch<double> random_batch(core::Rng& rng, int n = 1) {
  return {random_tensor(rng, {n, kStack, 8, 8}), random_tensor(rng, {n, 3, 8, 8})};
}

TEST(GanShapes, DiscriminatorInputChannelsAtPaperWindow) {
  Discriminator<float> d(core::GanConfig{}, cond::stack_channels(2), 2, 1);
  EXPECT_EQ(d.in_channels(), 76);
  EXPECT_EQ(d.num_scales(), 2);
}

TEST(GanShapes, GeneratorOutputShapeAndRange) {
  core::Rng rng(1);
  Generator<double> g(tiny_gan(), kStack, 3);
  nn::Tape<double> tape;
  auto out = g.forward(tape, bind(tape, g.params(), false),
                       tape.constant(random_tensor(rng, {2, kStack, 8, 8}, -3, 3)));
  EXPECT_EQ(out.shape(), (nn::Shape{2, 3, 8, 8}));
  for (double v : out.value().values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(GanShapes, GenerateIsDeterministic) {
  core::Rng rng(2);
  core::PipelineConfig pc;
  pc.image_h = pc.image_w = 16;
  Generator<float> g(tiny_gan(), cond::stack_channels(pc.n_prior), 4);
  std::vector<core::AUPSVector> priors(2, core::AUPSVector::zeros(true));
  std::vector<core::FrameImage> frames(2, core::FrameImage(16, 16, 0.3f));
  core::LandmarkSet lm;
  lm.points = {{0.3, 0.3}, {0.6, 0.7}};
  const auto stack = cond::assemble_stack(core::AUPSVector::zeros(true), priors, lm, frames, pc);
  const auto a = g.generate(stack);
  EXPECT_EQ(a, g.generate(stack));
  EXPECT_EQ(a.height(), 16);
  EXPECT_NO_THROW(a.validate());
}

TEST(GanShapes, ChannelMismatchIsShapeError) {
  Generator<float> g(tiny_gan(), kStack, 3);
  nn::Tape<float> tape;
  EXPECT_THROW(g.forward(tape, bind(tape, g.params(), false),
                         tape.constant(nn::Tensor<float>({1, kStack + 1, 8, 8}))),
               ShapeError);
}

TEST(GanShapes, WrongWindowLengthIsShapeError) {
  Discriminator<float> d(tiny_gan(), kStack, kPrior, 1);
  nn::Tape<float> tape;
  auto stack = tape.constant(nn::Tensor<float>({1, kStack, 8, 8}));
  auto f = tape.constant(nn::Tensor<float>({1, 3, 8, 8}));
  EXPECT_THROW(d.window_input(stack, std::vector<nn::Var<float>>{f, f, f}), ShapeError);
}

TEST(GanShapes, SecondScaleSeesAveragePooledInput) {
  core::Rng rng(3);
  auto cfg = tiny_gan();
  Discriminator<double> d(cfg, kStack, kPrior, 1);
  nn::Tape<double> tape;
  const auto db = bind(tape, d.params(), false);
  auto input = tape.constant(random_tensor(rng, {1, d.in_channels(), 8, 8}));
  const auto outs = d.forward(tape, db, input);
  ASSERT_EQ(outs.size(), 2u);
  ASSERT_EQ(outs[0].features.size(), 3u);

  // Single-scale discriminator whose parameters are those of scale 1, fed
  // avg_pool(input) directly, must reproduce scale 1's logits.
  auto single_cfg = cfg;
  single_cfg.n_scales = 1;
  Discriminator<double> single(single_cfg, kStack, kPrior, 9);
  auto it = d.params().begin();
  std::advance(it, static_cast<std::ptrdiff_t>(d.params().size() / 2));
  for (auto& p : single.params()) (p.value = it++->value);
  const auto sb = bind(tape, single.params(), false);
  const auto pooled = single.forward(tape, sb, nn::avg_pool2x2(input));
  EXPECT_EQ(pooled[0].logits.value(), outs[1].logits.value());
}

TEST(GanLossClosedForm, DLossAtHalfIsTwoLogTwoPerScale) {
  nn::Tape<double> tape;
  std::vector<nn::Var<double>> real, fake;
  for (int s = 0; s < 2; ++s) {
    real.push_back(tape.constant(nn::Tensor<double>({1, 1, 4, 4}, 0.0)));
    fake.push_back(tape.constant(nn::Tensor<double>({1, 1, 2, 2}, 0.0)));
  }
  const auto l = gan_loss(real, fake);
  EXPECT_NEAR(l.d_loss.value().item() / 2, 1.3863, 1e-4);
  EXPECT_NEAR(l.d_loss.value().item(), 4 * std::log(2.0), 1e-12);
}

TEST(GanLossClosedForm, PerfectDiscriminatorLimit) {
  nn::Tape<double> tape;
  const auto l = gan_loss<double>({tape.constant(nn::Tensor<double>({4}, 40.0))},
                                  {tape.constant(nn::Tensor<double>({4}, -40.0))});
  EXPECT_LT(l.d_loss.value().item(), 1e-15);
}

TEST(GanLossClosedForm, GLossDecreasesAsFakeScoreRises) {
  double prev = std::numeric_limits<double>::infinity();
  for (double x = -6; x <= 6; x += 0.5) {
    nn::Tape<double> tape;
    const auto l = gan_loss<double>({tape.constant(nn::Tensor<double>({1}, 0.0))},
                                    {tape.constant(nn::Tensor<double>({1}, x))});
    EXPECT_LT(l.g_loss.value().item(), prev);
    prev = l.g_loss.value().item();
  }
}

TEST(GanLossClosedForm, NanLogitsRejected) {
  nn::Tape<double> tape;
  EXPECT_THROW(gan_loss<double>({tape.constant(nn::Tensor<double>({1}, 0.0))},
                                {tape.constant(nn::Tensor<double>({1}, std::nan("")))}),
               InvalidInputError);
}

TEST(GanLossClosedForm, FeatureMatchingIdentityAndUnitGap) {
  core::Rng rng(4);
  nn::Tape<double> tape;
  std::vector<std::vector<nn::Var<double>>> f = {
      {tape.constant(random_tensor(rng, {1, 2, 3, 3})), tape.constant(random_tensor(rng, {1, 4}))}};
  EXPECT_EQ(fm_loss(f, f).value().item(), 0.0);
  std::vector<std::vector<nn::Var<double>>> zeros = {{tape.constant(nn::Tensor<double>({2, 2}))}};
  std::vector<std::vector<nn::Var<double>>> ones = {
      {tape.constant(nn::Tensor<double>({2, 2}, 1.0))}};
  EXPECT_EQ(fm_loss(zeros, ones).value().item(), 1.0);
  EXPECT_EQ(fm_loss(ones, zeros).value().item(), 1.0);
}

TEST(GanLossClosedForm, FeatureMatchingShapeMismatch) {
  nn::Tape<double> tape;
  std::vector<std::vector<nn::Var<double>>> a = {{tape.constant(nn::Tensor<double>({2, 2}))}};
  std::vector<std::vector<nn::Var<double>>> b = {{tape.constant(nn::Tensor<double>({2, 3}))}};
  EXPECT_THROW(fm_loss(a, b), ShapeError);
}

TEST(GanLossClosedForm, PerceptualIdentitySymmetryAndDegenerateReduction) {
  core::Rng rng(5);
  RandomConvExtractor<double> ex(3);
  nn::Tape<double> tape;
  auto a = tape.constant(random_tensor(rng, {1, 3, 8, 8}));
  auto b = tape.constant(random_tensor(rng, {1, 3, 8, 8}));
  EXPECT_EQ(perceptual_loss(tape, a, a, ex).value().item(), 0.0);
  const double ab = perceptual_loss(tape, a, b, ex).value().item();
  EXPECT_GT(ab, 0.0);
  EXPECT_EQ(ab, perceptual_loss(tape, b, a, ex).value().item());

  IdentityExtractor<double> id;
  auto p = tape.constant(nn::Tensor<double>({1, 3, 1, 1}, std::vector<double>{0.5, -0.25, 1.0}));
  auto q = tape.constant(nn::Tensor<double>({1, 3, 1, 1}, std::vector<double>{-0.5, 0.25, 0.0}));
  EXPECT_NEAR(perceptual_loss(tape, p, q, id).value().item(), (1.0 + 0.5 + 1.0) / 3, 1e-15);
  EXPECT_THROW(perceptual_loss(tape, a, p, id), ShapeError);
}

TEST(GanCombined, ZeroWeightsGivePureAdversarialLoss) {
  core::Rng rng(6);
  Generator<double> g(tiny_gan(), kStack, 1);
  Discriminator<double> d(tiny_gan(), kStack, kPrior, 2);
  RandomConvExtractor<double> ex(3);
  const auto batch = random_batch(rng);
  nn::Tape<double> tape;
  const auto l = combined_losses(tape, batch, g, bind(tape, g.params(), false), d,
                                 bind(tape, d.params(), false), ex, {0.0, 0.0, false});
  EXPECT_EQ(l.g_total.value().item(), l.g_adv.value().item());
}

TEST(GanCombined, LinearInEachLambda) {
  core::Rng rng(7);
  Generator<double> g(tiny_gan(), kStack, 1);
  Discriminator<double> d(tiny_gan(), kStack, kPrior, 2);
  RandomConvExtractor<double> ex(3);
  const auto batch = random_batch(rng);
  auto total = [&](double l1, double l2, double* fm, double* perc) {
    nn::Tape<double> tape;
    const auto l = combined_losses(tape, batch, g, bind(tape, g.params(), false), d,
                                   bind(tape, d.params(), false), ex, {l1, l2, false});
    if (fm) *fm = l.g_fm.value().item();
    if (perc) *perc = l.g_perc.value().item();
    return l.g_total.value().item();
  };
  double fm = 0, perc = 0;
  const double base = total(1.0, 2.0, &fm, &perc);
  EXPECT_NEAR((total(4.0, 2.0, nullptr, nullptr) - base) / 3.0, fm, 1e-12);
  EXPECT_NEAR((total(1.0, 7.0, nullptr, nullptr) - base) / 5.0, perc, 1e-12);
  EXPECT_THROW(total(-1.0, 0.0, nullptr, nullptr), ConfigError);
}

TEST(GanCombined, DefaultWeightsAreTen) {
  const LossWeights w;
  EXPECT_EQ(w.lambda_fm, 10.0);
  EXPECT_EQ(w.lambda_perc, 10.0);
  const core::GanConfig c;
  EXPECT_EQ(c.lambda_fm, 10.0);
  EXPECT_EQ(c.lambda_perc, 10.0);
}

// Gradient suite on tiny configs (float64, 8x8).
TEST(GanGrad, GeneratorMeanOutput) {
  core::Rng rng(8);
  Generator<double> g(tiny_gan(), kStack, 5);
  const auto stack = random_tensor(rng, {1, kStack, 8, 8});
  const auto r = testing::check_gradients(
      g.params(),
      [&](nn::Tape<double>& tape) {
        return nn::mean(g.forward(tape, bind(tape, g.params(), true), tape.constant(stack)));
      },
      1e-5, 24);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GanGrad, GeneratorWithInstanceNorm) {
  core::Rng rng(9);
  auto cfg = tiny_gan();
  cfg.norm = "instance";
  Generator<double> g(cfg, kStack, 5);
  const auto stack = random_tensor(rng, {1, kStack, 8, 8});
  const auto w = random_tensor(rng, {1, 3, 8, 8});
  const auto r = testing::check_gradients(
      g.params(),
      [&](nn::Tape<double>& tape) {
        auto out = g.forward(tape, bind(tape, g.params(), true), tape.constant(stack));
        return nn::sum(nn::mul(out, tape.constant(w)));
      },
      1e-5, 24);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GanGrad, DiscriminatorLoss) {
  core::Rng rng(10);
  Generator<double> g(tiny_gan(), kStack, 1);
  Discriminator<double> d(tiny_gan(), kStack, kPrior, 2);
  RandomConvExtractor<double> ex(3);
  const auto batch = random_batch(rng);
  const auto r = testing::check_gradients(
      d.params(),
      [&](nn::Tape<double>& tape) {
        return combined_losses(tape, batch, g, bind(tape, g.params(), false), d,
                               bind(tape, d.params(), true), ex, {}, true, false)
            .d_total;
      },
      1e-5, 24);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GanGrad, EachGeneratorLossTerm) {
  core::Rng rng(11);
  Generator<double> g(tiny_gan(), kStack, 1);
  Discriminator<double> d(tiny_gan(), kStack, kPrior, 2);
  RandomConvExtractor<double> ex(3);
  const auto batch = random_batch(rng);
  using Pick = nn::Var<double> LossTerms<double>::*;
  for (Pick pick : {&LossTerms<double>::g_adv, &LossTerms<double>::g_fm,
                    &LossTerms<double>::g_perc, &LossTerms<double>::g_total}) {
    const auto r = testing::check_gradients(
        g.params(),
        [&](nn::Tape<double>& tape) {
          auto l = combined_losses(tape, batch, g, bind(tape, g.params(), true), d,
                                   bind(tape, d.params(), false), ex, {}, false, true);
          return l.*pick;
        },
        1e-5, 16);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  }
}

TEST(GanGrad, LossTermsWithRespectToInputs) {
  core::Rng rng(12);
  RandomConvExtractor<double> ex(3);
  auto real = random_tensor(rng, {1, 3, 8, 8});
  auto fake = random_tensor(rng, {1, 3, 8, 8});
  auto r = testing::check_input_gradient(fake, [&](nn::Tape<double>& tape, const auto& x) {
    return perceptual_loss(tape, x, tape.constant(real), ex);
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;

  auto logits = random_tensor(rng, {1, 1, 3, 3}, -3, 3);
  r = testing::check_input_gradient(logits, [&](nn::Tape<double>& tape, const auto& x) {
    auto l = gan_loss<double>({tape.constant(nn::Tensor<double>({1, 1, 3, 3}, 0.7))}, {x});
    return nn::add(l.d_loss, l.g_loss);
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;

  auto feats = random_tensor(rng, {2, 5});
  const auto target = random_tensor(rng, {2, 5});
  r = testing::check_input_gradient(feats, [&](nn::Tape<double>& tape, const auto& x) {
    return fm_loss<double>({{tape.constant(target)}}, {{x}});
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GanGrad, LsganVariant) {
  core::Rng rng(13);
  auto logits = random_tensor(rng, {4}, -2, 2);
  const auto r = testing::check_input_gradient(logits, [&](nn::Tape<double>& tape, const auto& x) {
    auto l = gan_loss<double>({x}, {nn::scale(x, 0.5)}, true);
    return nn::add(l.d_loss, l.g_loss);
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

// Directional derivative of d_total along the negative gradient is negative,
// and a tiny Adam step lowers d_total on the same batch.
TEST(GanDescent, DiscriminatorStepIsADescentDirection) {
  core::Rng rng(14);
  Generator<double> g(tiny_gan(), kStack, 1);
  Discriminator<double> d(tiny_gan(), kStack, kPrior, 2);
  RandomConvExtractor<double> ex(3);
  const auto batch = random_batch(rng);
  auto d_total = [&](bool trainable) {
    nn::Tape<double> tape;
    auto l = combined_losses(tape, batch, g, bind(tape, g.params(), false), d,
                             bind(tape, d.params(), trainable), ex, {}, true, false);
    if (trainable) tape.backward(l.d_total);
    return l.d_total.value().item();
  };
  d.params().zero_grad();
  const double before = d_total(true);
  const double h = 1e-6;
  double grad_sq = 0;
  for (auto& p : d.params()) {
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      grad_sq += p.grad[i] * p.grad[i];
      p.value[i] -= h * p.grad[i];
    }
  }
  const double directional = (d_total(false) - before) / h;
  EXPECT_LT(directional, 0.0);
  EXPECT_NEAR(directional, -grad_sq, 1e-3 * grad_sq + 1e-9);
}

}  // namespace
}  // namespace anchor::gan
