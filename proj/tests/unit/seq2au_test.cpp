#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/nn/ops.hpp"
#include "anchor/seq2au/model.hpp"
#include "gradcheck.hpp"

namespace anchor::seq2au {
namespace {

using core::AUPSVector;

core::Seq2AUConfig tiny_config(int hidden = 8, int layers = 1) {
  core::Seq2AUConfig c;
  c.hidden = hidden;
  c.layers = layers;
  c.t_max = 12;
  return c;
}

Example random_example(core::Rng& rng, int dim, int words, int frames) {
  Example ex;
  for (int w = 0; w < words; ++w) {
    ex.tokens.emplace_back("w" + std::to_string(rng.below(5)));
    std::vector<float> v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = static_cast<float>(rng.normal());
    ex.vectors.push_back(v);
  }
  for (int f = 0; f < frames; ++f) {
    AUPSVector a = AUPSVector::zeros(true);
    for (auto& x : a.au) x = rng.uniform();
    for (auto& x : a.pose) x = rng.uniform(-1.0, 1.0);
    ex.targets.push_back(a);
  }
  return ex;
}

std::vector<const Example*> ptrs(const std::vector<Example>& v) {
  std::vector<const Example*> out;
  for (const auto& e : v) out.push_back(&e);
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Seq2AUGrad, FullLossMatchesFiniteDifferencesOnTenConfigs) {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    core::Rng rng(100 + trial);
    auto cfg = tiny_config(8, trial % 3 == 2 ? 2 : 1);
    cfg.lambda_stop = 0.5 + rng.uniform();
    Seq2AU<double> model(cfg, 6, 1000 + trial);
    // Ragged batch so masking paths are covered.
    std::vector<Example> batch;
    const int rows = 1 + static_cast<int>(trial % 3);
    for (int r = 0; r < rows; ++r) {
      batch.push_back(random_example(rng, 6, 1 + static_cast<int>(rng.below(3)),
                                     1 + static_cast<int>(rng.below(4))));
    }
    const auto bp = ptrs(batch);
    auto result = testing::check_gradients(model.params(), [&](nn::Tape<double>& tape) {
      const auto b = model.bind(tape, true);
      return model.loss(tape, b, bp, nullptr);
    });
    EXPECT_LT(result.max_rel_error, 1e-4) << "trial " << trial << " worst " << result.worst;
    EXPECT_EQ(result.checked, model.params().numel());
  }
}

TEST(Seq2AUGrad, EncoderOutputGradient) {
  core::Rng rng(5);
  Seq2AU<double> model(tiny_config(), 6, 9);
  const std::vector<Example> batch = {random_example(rng, 6, 3, 1)};
  const auto bp = ptrs(batch);
  nn::Tensor<double> weights({1, 8});
  for (auto& w : weights.values()) w = rng.normal();
  auto result = testing::check_gradients(model.params(), [&](nn::Tape<double>& tape) {
    const auto b = model.bind(tape, true);
    auto enc = model.encode(tape, b, bp);
    return nn::sum(nn::mul(enc.h_enc, tape.constant(weights)));
  });
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst;
}

TEST(Seq2AUGrad, SingleDecodeStepGradient) {
  core::Rng rng(6);
  Seq2AU<double> model(tiny_config(), 6, 10);
  nn::Tensor<double> h_enc({2, 8}), y_prev({2, 20}), w_y({2, 20}), w_s({2, 1});
  for (auto* t : {&h_enc, &w_y, &w_s}) {
    for (auto& v : t->values()) v = rng.normal();
  }
  for (auto& v : y_prev.values()) v = rng.uniform();
  auto result = testing::check_gradients(model.params(), [&](nn::Tape<double>& tape) {
    const auto b = model.bind(tape, true);
    auto he = tape.constant(h_enc);
    auto s0 = model.initial_state(tape, b, he);
    auto s = model.decode_step(tape, b, s0, he, tape.constant(y_prev));
    return nn::add(nn::sum(nn::mul(s.y, tape.constant(w_y))),
                   nn::sum(nn::mul(s.stop, tape.constant(w_s))));
  });
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst;
}

TEST(Seq2AUGrad, FinetunedEmbeddingsReceiveGradients) {
  core::Rng rng(7);
  auto cfg = tiny_config();
  cfg.finetune_embeddings = true;
  Seq2AU<double> model(cfg, 6, 11);
  text::EmbeddingTable table(6, 3);
  const std::vector<std::string> words = {"w0", "w1", "w2", "w3", "w4"};
  model.add_embedding_params(table, words);
  std::vector<Example> batch = {random_example(rng, 6, 3, 3), random_example(rng, 6, 2, 2)};
  const auto bp = ptrs(batch);
  auto result = testing::check_gradients(model.params(), [&](nn::Tape<double>& tape) {
    const auto b = model.bind(tape, true);
    return model.loss(tape, b, bp, nullptr);
  });
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst;
  double embed_grad = 0;
  for (const auto& p : model.params()) {
    if (p.name.rfind("embed.", 0) == 0) {
      for (double g : p.grad.values()) embed_grad += std::abs(g);
    }
  }
  EXPECT_GT(embed_grad, 0.0);
}

TEST(Seq2AUEncode, SameSentenceTwiceIsBitwiseIdentical) {
  core::Rng rng(1);
  Seq2AU<float> model(tiny_config(16), 6, 3);
  const Example ex = random_example(rng, 6, 4, 2);
  const Example* bp[] = {&ex};
  nn::Tape<float> t1, t2;
  const auto a = model.encode(t1, model.bind(t1, false), bp).h_enc.value();
  const auto b = model.encode(t2, model.bind(t2, false), bp).h_enc.value();
  EXPECT_EQ(a, b);
}

// Hand-unrolled single LSTM step from the zero state, then the output layer.
TEST(Seq2AUEncode, OneWordSentenceIsOneCellStepThenLinear) {
  core::Rng rng(2);
  Seq2AU<double> model(tiny_config(), 6, 4);
  const Example ex = random_example(rng, 6, 1, 1);
  const Example* bp[] = {&ex};
  nn::Tape<double> tape;
  const auto h_enc = model.encode(tape, model.bind(tape, false), bp).h_enc.value();

  const auto& p = model.params();
  const auto& w_ih = p.find("enc.l0.w_ih")->value;
  const auto& bias = p.find("enc.l0.b")->value;
  const auto& w_out = p.find("enc.out.w")->value;
  const auto& b_out = p.find("enc.out.b")->value;
  const int H = 8, D = 6;
  std::vector<double> gates(4 * H);
  for (int r = 0; r < 4 * H; ++r) {
    double s = bias[r];
    for (int d = 0; d < D; ++d) s += w_ih[r * D + d] * ex.vectors[0][d];
    gates[r] = s;
  }
  std::vector<double> h(H);
  for (int j = 0; j < H; ++j) {
    const double c = sigmoid(gates[j]) * std::tanh(gates[2 * H + j]);  // f * c0 = 0
    h[j] = sigmoid(gates[3 * H + j]) * std::tanh(c);
  }
  for (int j = 0; j < H; ++j) {
    double s = b_out[j];
    for (int k = 0; k < H; ++k) s += w_out[j * H + k] * h[k];
    EXPECT_NEAR(h_enc[j], s, 1e-12);
  }
}

TEST(Seq2AUEncode, NanInputIsInvalid) {
  core::Rng rng(3);
  Seq2AU<float> model(tiny_config(), 6, 4);
  Example ex = random_example(rng, 6, 2, 1);
  ex.vectors[1][3] = std::nanf("");
  EXPECT_THROW(model.infer(ex), InvalidInputError);
}

TEST(Seq2AUDecode, ShapeMismatchIsShapeError) {
  Seq2AU<float> model(tiny_config(), 6, 4);
  nn::Tape<float> tape;
  const auto b = model.bind(tape, false);
  auto he = tape.constant(nn::Tensor<float>({1, 8}));
  auto s0 = model.initial_state(tape, b, he);
  EXPECT_THROW(model.decode_step(tape, b, s0, he, tape.constant(nn::Tensor<float>({1, 19}))),
               ShapeError);
}

TEST(Seq2AUTrain, TooLongSequenceIsLengthError) {
  core::Rng rng(3);
  Seq2AU<float> model(tiny_config(), 6, 4);
  nn::Adam<float> opt(model.params(), {});
  const Example ex = random_example(rng, 6, 2, 13);
  const Example* bp[] = {&ex};
  EXPECT_THROW(model.train_step(bp, opt), LengthError);
}

TEST(Seq2AUTrain, FullTeacherForcingIgnoresSampler) {
  core::Rng rng(31);
  Seq2AU<double> model(tiny_config(), 6, 4);
  std::vector<Example> data = {random_example(rng, 6, 2, 5), random_example(rng, 6, 3, 3)};
  const auto bp = ptrs(data);
  nn::Tape<double> tape;
  const auto b = model.bind(tape, false);
  core::Rng sampler(9);
  const double plain = model.loss(tape, b, bp, nullptr).value().item();
  EXPECT_EQ(model.loss(tape, b, bp, nullptr, {&sampler, 1.0}).value().item(), plain);
  EXPECT_EQ(sampler.next(), core::Rng(9).next());  // no draws consumed
}

TEST(Seq2AUTrain, ZeroTeacherForcingMatchesFreeRunningOutputs) {
  core::Rng rng(32);
  Seq2AU<double> model(tiny_config(), 6, 4);
  model.params().find("head.b")->value[20] = -50.0;  // never stop early
  const Example ex = random_example(rng, 6, 3, 7);
  const Example* bp[] = {&ex};
  nn::Tape<double> tape;
  core::Rng sampler(1);
  LossReport r;
  model.loss(tape, model.bind(tape, false), bp, &r, {&sampler, 0.0});
  const auto free = model.infer(ex);
  ASSERT_GE(free.aups.size(), ex.targets.size());
  double se = 0.0;
  for (std::size_t t = 0; t < ex.targets.size(); ++t) {
    const auto a = free.aups[t].flat(), g = ex.targets[t].flat();
    for (int d = 0; d < 20; ++d) se += (a[d] - g[d]) * (a[d] - g[d]);
  }
  EXPECT_NEAR(r.mse, se / (20.0 * ex.targets.size()), 1e-12);
}

TEST(Seq2AUTrain, PartialTeacherForcingIsSeededMixture) {
  core::Rng rng(33);
  auto cfg = tiny_config();
  Seq2AU<double> model(cfg, 6, 8);
  std::vector<Example> data = {random_example(rng, 6, 2, 6), random_example(rng, 6, 1, 5)};
  const auto bp = ptrs(data);
  auto mse_at = [&](double ratio, std::uint64_t seed) {
    nn::Tape<double> tape;
    core::Rng sampler(seed);
    LossReport r;
    model.loss(tape, model.bind(tape, false), bp, &r, {&sampler, ratio});
    return r.mse;
  };
  const double forced = mse_at(1.0, 5), free = mse_at(0.0, 5), half = mse_at(0.5, 5);
  EXPECT_EQ(half, mse_at(0.5, 5));
  EXPECT_NE(half, forced);
  EXPECT_NE(half, free);
  EXPECT_NE(forced, free);
}

TEST(Seq2AUTrain, GradientClippingCapsTheFirstAdamMoment) {
  // After one step the first moment is (1 - beta1) * g, so its global norm
  // reveals the clipped gradient norm.
  core::Rng rng(34);
  const Example ex = random_example(rng, 6, 2, 4);
  const Example* bp[] = {&ex};
  auto moment_norm = [&](double clip) {
    auto cfg = tiny_config();
    cfg.grad_clip = clip;
    Seq2AU<double> model(cfg, 6, 4);
    nn::Adam<double> opt(model.params(), {});
    model.train_step(bp, opt);
    double sq = 0.0;
    for (const auto& m : opt.first_moments()) {
      for (double v : m.values()) sq += v * v;
    }
    return std::sqrt(sq) / (1.0 - 0.9);
  };
  const double raw = moment_norm(0.0);
  ASSERT_GT(raw, 0.01);
  EXPECT_NEAR(moment_norm(0.01), 0.01, 1e-12);
  EXPECT_NEAR(moment_norm(raw * 10.0), raw, 1e-12);
}

TEST(Seq2AUTrain, ExactOutputsGiveZeroLoss) {
  // Zero head weights and a bias tuned to the targets: sigmoid/tanh outputs hit
  // the targets exactly when targets are representable, and the stop term
  // vanishes with saturated logits of the right sign.
  Seq2AU<double> model(tiny_config(), 6, 4);
  auto& w = model.params().find("head.w")->value;
  auto& bias = model.params().find("head.b")->value;
  w.zero();
  for (int d = 0; d < 17; ++d) bias[d] = 0.0;  // sigmoid(0) = 0.5
  for (int d = 17; d < 20; ++d) bias[d] = 0.0;  // tanh(0) = 0
  bias[20] = std::numeric_limits<double>::infinity();
  Example ex;
  ex.vectors = {std::vector<float>(6, 0.1f)};
  AUPSVector t = AUPSVector::zeros(true);
  t.au.fill(0.5);
  ex.targets = {t};
  const Example* bp[] = {&ex};
  nn::Tape<double> tape;
  LossReport r;
  model.loss(tape, model.bind(tape, false), bp, &r);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.stop_bce, 0.0);
  EXPECT_EQ(r.total, 0.0);
}

TEST(Seq2AUTrain, ReportsBothComponents) {
  core::Rng rng(12);
  auto cfg = tiny_config();
  cfg.lambda_stop = 0.25;
  Seq2AU<double> model(cfg, 6, 4);
  nn::Adam<double> opt(model.params(), {});
  const Example ex = random_example(rng, 6, 2, 3);
  const Example* bp[] = {&ex};
  const auto r = model.train_step(bp, opt);
  EXPECT_GT(r.mse, 0.0);
  EXPECT_GT(r.stop_bce, 0.0);
  EXPECT_NEAR(r.total, r.mse + 0.25 * r.stop_bce, 1e-12);
}

TEST(Seq2AUTrain, DeterministicParametersAfterKSteps) {
  auto run = [] {
    core::Rng rng(44);
    Seq2AU<float> model(tiny_config(16), 6, 21);
    nn::Adam<float> opt(model.params(), {});
    std::vector<Example> data = {random_example(rng, 6, 3, 5), random_example(rng, 6, 2, 4)};
    const auto bp = ptrs(data);
    for (int k = 0; k < 5; ++k) model.train_step(bp, opt);
    std::vector<nn::Tensor<float>> out;
    for (const auto& p : model.params()) out.push_back(p.value);
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Seq2AUTrain, SmallBatchOverfits) {
  core::Rng rng(13);
  auto cfg = tiny_config(32);
  cfg.t_max = 20;
  Seq2AU<float> model(cfg, 6, 5);
  nn::Adam<float> opt(model.params(), {0.01, 0.9, 0.999, 1e-8});
  std::vector<Example> data = {random_example(rng, 6, 2, 4), random_example(rng, 6, 3, 6)};
  const auto bp = ptrs(data);
  const double first = model.train_step(bp, opt).total;
  LossReport last;
  for (int k = 0; k < 300; ++k) last = model.train_step(bp, opt);
  EXPECT_LT(last.total, 0.1 * first);
}

TEST(Seq2AUInfer, OutputsAlwaysInNormalizedRange) {
  core::Rng rng(77);
  auto cfg = tiny_config();
  cfg.t_max = 8;
  std::size_t emitted = 0;
  for (int trial = 0; emitted < 10000; ++trial) {
    Seq2AU<float> model(cfg, 6, static_cast<std::uint64_t>(trial));
    for (auto& p : model.params()) {
      for (auto& v : p.value.values()) v = static_cast<float>(rng.uniform(-4.0, 4.0));
    }
    const auto out = model.infer(random_example(rng, 6, 1 + static_cast<int>(rng.below(4)), 0));
    ASSERT_GE(out.aups.size(), 1u);
    ASSERT_LE(out.aups.size(), 8u);
    for (const auto& v : out.aups) {
      EXPECT_NO_THROW(v.validate());
      ++emitted;
    }
  }
}

TEST(Seq2AUInfer, StopsAtTMaxWithoutStopSignal) {
  auto cfg = tiny_config();
  cfg.t_max = 5;
  Seq2AU<float> model(cfg, 6, 1);
  model.params().find("head.b")->value[20] = -50.0f;
  core::Rng rng(1);
  const auto out = model.infer(random_example(rng, 6, 2, 0));
  EXPECT_EQ(out.aups.size(), 5u);
  EXPECT_FALSE(out.stopped);
}

TEST(Seq2AUInfer, TeacherForcingOnOwnOutputsMatchesFreeRunning) {
  core::Rng rng(31);
  auto cfg = tiny_config(16);
  cfg.t_max = 10;
  Seq2AU<float> model(cfg, 6, 8);
  Example ex = random_example(rng, 6, 3, 0);
  const auto free = model.infer(ex);
  ex.targets = free.aups;
  const auto forced = model.teacher_forced(ex);
  ASSERT_EQ(forced.hidden.size(), free.hidden.size());
  for (std::size_t t = 0; t < free.hidden.size(); ++t) EXPECT_EQ(forced.hidden[t], free.hidden[t]);
}

TEST(Seq2AUInfer, StepOutputIgnoresFutureTargets) {
  core::Rng rng(32);
  Seq2AU<double> model(tiny_config(), 6, 8);
  Example ex = random_example(rng, 6, 2, 6);
  const auto base = model.teacher_forced(ex);
  for (std::size_t l = 0; l < ex.targets.size(); ++l) {
    Example perturbed = ex;
    for (std::size_t f = l; f < ex.targets.size(); ++f) perturbed.targets[f].au.fill(0.9);
    const auto out = model.teacher_forced(perturbed);
    EXPECT_EQ(out.aups[l], base.aups[l]) << "step " << l;
  }
}

}  // namespace
}  // namespace anchor::seq2au
