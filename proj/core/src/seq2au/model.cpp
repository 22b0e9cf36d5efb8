#include "anchor/seq2au/model.hpp"

#include <algorithm>
#include <cmath>

#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/nn/ops.hpp"

namespace anchor::seq2au {
namespace {

constexpr int kOut = static_cast<int>(core::kAUPSDim);
constexpr int kAU = static_cast<int>(core::kNumAU);
constexpr int kPose = static_cast<int>(core::kNumPose);

template <typename T>
nn::Tensor<T> aups_rows(std::span<const Example* const> batch, std::size_t t) {
  nn::Tensor<T> out({static_cast<int>(batch.size()), kOut});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& tg = batch[b]->targets;
    if (t >= tg.size()) continue;
    const auto flat = tg[t].flat();
    for (int d = 0; d < kOut; ++d) out[b * kOut + static_cast<std::size_t>(d)] = static_cast<T>(flat[d]);
  }
  return out;
}

void check_example(const Example& ex, int embed_dim) {
  if (ex.vectors.empty()) throw EmptyInputError("seq2au input sentence has no words");
  if (!ex.tokens.empty() && ex.tokens.size() != ex.vectors.size()) {
    throw ShapeError("tokens and vectors are not aligned");
  }
  for (const auto& v : ex.vectors) {
    if (static_cast<int>(v.size()) != embed_dim) {
      throw ShapeError("word vector of length " + std::to_string(v.size()) + ", expected " +
                       std::to_string(embed_dim));
    }
    for (float x : v) {
      if (!std::isfinite(x)) throw InvalidInputError("non-finite value in word vector");
    }
  }
}

}  // namespace

Example make_example(const core::SampleRecord& record, const text::EmbeddingTable& table) {
  Example ex;
  ex.tokens = text::tokenize(record.text);
  auto embedded = text::embed(ex.tokens, table);
  ex.vectors = std::move(embedded.vectors);
  ex.targets = record.aups_seq;
  return ex;
}

template <typename T>
Seq2AU<T>::Seq2AU(const core::Seq2AUConfig& config, int embed_dim, std::uint64_t seed)
    : config_(config), embed_dim_(embed_dim) {
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (config.hidden < 1 || config.layers < 1) throw ConfigError("hidden and layers must be >= 1");
  const int h = config.hidden;
  const double k = 1.0 / std::sqrt(static_cast<double>(h));
  core::Rng rng(seed);
  auto layer = [&](const std::string& prefix, int in) {
    LayerIds ids;
    ids.w_ih = params_.add_uniform(prefix + ".w_ih", {4 * h, in}, k, rng);
    ids.w_hh = params_.add_uniform(prefix + ".w_hh", {4 * h, h}, k, rng);
    ids.b = params_.add_uniform(prefix + ".b", {4 * h}, k, rng);
    return ids;
  };
  for (int l = 0; l < config.layers; ++l) {
    enc_.push_back(layer("enc.l" + std::to_string(l), l == 0 ? embed_dim : h));
  }
  enc_out_w_ = params_.add_uniform("enc.out.w", {h, h}, k, rng);
  enc_out_b_ = params_.add_uniform("enc.out.b", {h}, k, rng);
  for (int l = 0; l < config.layers; ++l) {
    init_w_.push_back(params_.add_uniform("dec.init.l" + std::to_string(l) + ".w", {h, h}, k, rng));
    init_b_.push_back(params_.add_uniform("dec.init.l" + std::to_string(l) + ".b", {h}, k, rng));
  }
  for (int l = 0; l < config.layers; ++l) {
    dec_.push_back(layer("dec.l" + std::to_string(l), l == 0 ? h + kOut : h));
  }
  head_w_ = params_.add_uniform("head.w", {kOut + 1, h}, k, rng);
  head_b_ = params_.add_uniform("head.b", {kOut + 1}, k, rng);
}

template <typename T>
void Seq2AU<T>::add_embedding_params(const text::EmbeddingTable& table,
                                     std::span<const std::string> words) {
  if (table.dim() != embed_dim_) throw ShapeError("embedding table dim does not match the model");
  for (const auto& w : words) {
    if (embed_ids_.count(w)) continue;
    const auto vec = table.lookup(w);
    const nn::ParamId id = params_.add("embed." + w, {1, embed_dim_});
    for (int d = 0; d < embed_dim_; ++d) params_[id].value[static_cast<std::size_t>(d)] = static_cast<T>(vec[d]);
    embed_ids_.emplace(w, id);
  }
}

template <typename T>
typename Seq2AU<T>::Bound Seq2AU<T>::bind(nn::Tape<T>& tape, bool trainable) {
  Bound b;
  b.trainable = trainable;
  for (auto& p : params_) b.vars.push_back(trainable ? tape.param(p) : tape.frozen(p));
  return b;
}

template <typename T>
typename Seq2AU<T>::Var Seq2AU<T>::lstm(nn::Tape<T>& tape, const Bound& b, const LayerIds& ids,
                                        const Var& x, Var& h, Var& c) const {
  (void)tape;
  const int hs = config_.hidden;
  Var gates = nn::add(nn::linear(x, b.vars[ids.w_ih.index], b.vars[ids.b.index]),
                      nn::linear(h, b.vars[ids.w_hh.index], Var{}));
  Var i = nn::sigmoid(nn::slice(gates, 1, 0, hs));
  Var f = nn::sigmoid(nn::slice(gates, 1, hs, hs));
  Var g = nn::tanh(nn::slice(gates, 1, 2 * hs, hs));
  Var o = nn::sigmoid(nn::slice(gates, 1, 3 * hs, hs));
  c = nn::add(nn::mul(f, c), nn::mul(i, g));
  h = nn::mul(o, nn::tanh(c));
  return h;
}

template <typename T>
typename Seq2AU<T>::Var Seq2AU<T>::word_inputs(nn::Tape<T>& tape, const Bound& b,
                                               std::span<const Example* const> batch,
                                               std::size_t t) const {
  const int rows = static_cast<int>(batch.size());
  if (embed_ids_.empty()) {
    nn::Tensor<T> x({rows, embed_dim_});
    for (int r = 0; r < rows; ++r) {
      const auto& vecs = batch[static_cast<std::size_t>(r)]->vectors;
      if (t >= vecs.size()) continue;
      std::copy(vecs[t].begin(), vecs[t].end(), x.data() + static_cast<std::size_t>(r) * embed_dim_);
    }
    return tape.constant(std::move(x));
  }
  std::vector<Var> parts;
  for (const Example* ex : batch) {
    if (t < ex->tokens.size()) {
      auto it = embed_ids_.find(ex->tokens[t].surface());
      if (it != embed_ids_.end()) {
        parts.push_back(b.vars[it->second.index]);
        continue;
      }
    }
    nn::Tensor<T> row({1, embed_dim_});
    if (t < ex->vectors.size()) std::copy(ex->vectors[t].begin(), ex->vectors[t].end(), row.data());
    parts.push_back(tape.constant(std::move(row)));
  }
  return parts.size() == 1 ? parts[0] : nn::concat(parts, 0);
}

template <typename T>
typename Seq2AU<T>::Encoded Seq2AU<T>::encode(nn::Tape<T>& tape, const Bound& b,
                                              std::span<const Example* const> batch) const {
  if (batch.empty()) throw EmptyInputError("empty seq2au batch");
  std::size_t longest = 0;
  for (const Example* ex : batch) {
    check_example(*ex, embed_dim_);
    longest = std::max(longest, ex->vectors.size());
  }
  const int rows = static_cast<int>(batch.size());
  const int hs = config_.hidden;
  std::vector<Var> h(enc_.size()), c(enc_.size());
  for (std::size_t l = 0; l < enc_.size(); ++l) {
    h[l] = tape.constant(nn::Tensor<T>({rows, hs}));
    c[l] = tape.constant(nn::Tensor<T>({rows, hs}));
  }
  Encoded out;
  for (std::size_t t = 0; t < longest; ++t) {
    // Rows whose sentence has ended keep their state: s <- s + m * (s' - s).
    bool all_valid = true;
    nn::Tensor<T> mask({rows, hs});
    for (int r = 0; r < rows; ++r) {
      const bool valid = t < batch[static_cast<std::size_t>(r)]->vectors.size();
      all_valid = all_valid && valid;
      std::fill_n(mask.data() + static_cast<std::size_t>(r) * hs, hs, valid ? T(1) : T(0));
    }
    Var m = all_valid ? Var{} : tape.constant(std::move(mask));
    Var x = word_inputs(tape, b, batch, t);
    for (std::size_t l = 0; l < enc_.size(); ++l) {
      Var hn = h[l], cn = c[l];
      lstm(tape, b, enc_[l], x, hn, cn);
      if (all_valid) {
        h[l] = hn;
        c[l] = cn;
      } else {
        h[l] = nn::add(h[l], nn::mul(m, nn::sub(hn, h[l])));
        c[l] = nn::add(c[l], nn::mul(m, nn::sub(cn, c[l])));
      }
      x = h[l];
    }
    out.hiddens.push_back(h.back());
  }
  out.h_enc = nn::linear(h.back(), b.vars[enc_out_w_.index], b.vars[enc_out_b_.index]);
  return out;
}

template <typename T>
typename Seq2AU<T>::State Seq2AU<T>::initial_state(nn::Tape<T>& tape, const Bound& b,
                                                   const Var& h_enc) const {
  State s;
  const int rows = h_enc.dim(0);
  for (std::size_t l = 0; l < dec_.size(); ++l) {
    s.h.push_back(nn::tanh(nn::linear(h_enc, b.vars[init_w_[l].index], b.vars[init_b_[l].index])));
    s.c.push_back(tape.constant(nn::Tensor<T>({rows, config_.hidden})));
  }
  return s;
}

template <typename T>
typename Seq2AU<T>::Step Seq2AU<T>::decode_step(nn::Tape<T>& tape, const Bound& b,
                                                const State& prev, const Var& h_enc,
                                                const Var& y_prev) const {
  if (y_prev.shape() != nn::Shape{h_enc.dim(0), kOut}) {
    throw ShapeError("decode_step: y_prev has shape " + nn::shape_string(y_prev.shape()));
  }
  Step s;
  s.state = prev;
  Var x = nn::concat<T>({h_enc, y_prev}, 1);
  for (std::size_t l = 0; l < dec_.size(); ++l) {
    lstm(tape, b, dec_[l], x, s.state.h[l], s.state.c[l]);
    x = s.state.h[l];
  }
  Var head = nn::linear(x, b.vars[head_w_.index], b.vars[head_b_.index]);
  s.y = nn::concat<T>({nn::sigmoid(nn::slice(head, 1, 0, kAU)),
                       nn::tanh(nn::slice(head, 1, kAU, kPose))},
                      1);
  s.stop = nn::slice(head, 1, kOut, 1);
  return s;
}

template <typename T>
typename Seq2AU<T>::Var Seq2AU<T>::loss(nn::Tape<T>& tape, const Bound& b,
                                        std::span<const Example* const> batch,
                                        LossReport* report, const Feedback& feedback) const {
  std::size_t longest = 0, valid = 0;
  for (const Example* ex : batch) {
    if (ex->targets.empty()) throw EmptyInputError("training example without target frames");
    if (static_cast<int>(ex->targets.size()) > config_.t_max) {
      throw LengthError("target sequence of " + std::to_string(ex->targets.size()) +
                        " frames exceeds t_max=" + std::to_string(config_.t_max));
    }
    for (const auto& v : ex->targets) {
      if (!v.normalized) throw ContractError("seq2au targets must be normalized");
    }
    longest = std::max(longest, ex->targets.size());
    valid += ex->targets.size();
  }
  Encoded enc = encode(tape, b, batch);
  State state = initial_state(tape, b, enc.h_enc);
  const int rows = static_cast<int>(batch.size());

  std::vector<Var> ys, stops;
  std::vector<T> mse_w, bce_w, stop_t;
  nn::Tensor<T> targets({static_cast<int>(longest) * rows, kOut});
  Var y_prev = tape.constant(nn::Tensor<T>({rows, kOut}));
  for (std::size_t t = 0; t < longest; ++t) {
    Step s = decode_step(tape, b, state, enc.h_enc, y_prev);
    state = s.state;
    ys.push_back(s.y);
    stops.push_back(s.stop);
    const auto rows_t = aups_rows<T>(batch, t);
    std::copy(rows_t.values().begin(), rows_t.values().end(),
              targets.data() + t * static_cast<std::size_t>(rows) * kOut);
    for (const Example* ex : batch) {
      const bool in = t < ex->targets.size();
      mse_w.push_back(in ? T(1) / static_cast<T>(valid * kOut) : T(0));
      bce_w.push_back(in ? T(1) / static_cast<T>(valid) : T(0));
      stop_t.push_back(in && t + 1 == ex->targets.size() ? T(1) : T(0));
    }
    if (feedback.rng && feedback.teacher_ratio < 1.0) {
      nn::Tensor<T> mixed = rows_t;
      for (int r = 0; r < rows; ++r) {
        if (feedback.rng->uniform() < feedback.teacher_ratio) continue;
        for (int d = 0; d < kOut; ++d) {
          const std::size_t i = static_cast<std::size_t>(r) * kOut + d;
          mixed[i] = s.y.value()[i];
        }
      }
      y_prev = tape.constant(mixed);
    } else {
      y_prev = tape.constant(rows_t);
    }
  }
  Var y_all = ys.size() == 1 ? ys[0] : nn::concat(ys, 0);
  Var stop_all = stops.size() == 1 ? stops[0] : nn::concat(stops, 0);
  Var mse = nn::weighted_sse<T>(y_all, targets, mse_w);
  Var bce = nn::weighted_bce_logits<T>(stop_all, stop_t, bce_w);
  Var total = nn::add(mse, nn::scale(bce, static_cast<T>(config_.lambda_stop)));
  if (report) {
    report->mse = static_cast<double>(mse.value().item());
    report->stop_bce = static_cast<double>(bce.value().item());
    report->total = static_cast<double>(total.value().item());
  }
  return total;
}

template <typename T>
LossReport Seq2AU<T>::train_step(std::span<const Example* const> batch, nn::Adam<T>& opt,
                                 const Feedback& feedback) {
  if (batch.empty()) throw EmptyInputError("empty seq2au batch");
  LossReport report;
  params_.zero_grad();
  {
    nn::Tape<T> tape;
    const Bound b = bind(tape, true);
    tape.backward(loss(tape, b, batch, &report, feedback));
  }
  if (!std::isfinite(report.total)) throw ContractError("seq2au loss became non-finite");
  if (config_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_) {
      for (T g : p.grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.grad_clip) {
      const T f = static_cast<T>(config_.grad_clip / norm);
      for (auto& p : params_) {
        for (T& g : p.grad.values()) g *= f;
      }
    }
  }
  opt.step(params_);
  return report;
}

template <typename T>
Inference<T> Seq2AU<T>::unroll(const Example& input, bool teacher) const {
  nn::Tape<T> tape;
  Bound b;
  for (const auto& p : params_) b.vars.push_back(tape.frozen(p));
  const Example* batch[] = {&input};
  Encoded enc = encode(tape, b, batch);
  State state = initial_state(tape, b, enc.h_enc);
  Var y_prev = tape.constant(nn::Tensor<T>({1, kOut}));
  const std::size_t limit = teacher ? input.targets.size() : static_cast<std::size_t>(config_.t_max);
  Inference<T> out;
  for (std::size_t t = 0; t < limit; ++t) {
    Step s = decode_step(tape, b, state, enc.h_enc, y_prev);
    state = s.state;
    std::array<double, core::kAUPSDim> flat{};
    for (int d = 0; d < kOut; ++d) flat[d] = static_cast<double>(s.y.value()[static_cast<std::size_t>(d)]);
    out.aups.push_back(core::AUPSVector::from_flat(flat, true));
    out.stop_prob.push_back(static_cast<double>(nn::stable_sigmoid(s.stop.value()[0])));
    const auto& hv = s.state.h.back().value();
    out.hidden.emplace_back(hv.values().begin(), hv.values().end());
    if (teacher) {
      const Example* one[] = {&input};
      y_prev = tape.constant(aups_rows<T>(one, t));
    } else {
      if (out.stop_prob.back() > 0.5) {
        out.stopped = true;
        break;
      }
      y_prev = tape.detach(s.y);
    }
  }
  return out;
}

template <typename T>
Inference<T> Seq2AU<T>::infer(const Example& input) const {
  return unroll(input, false);
}

template <typename T>
Inference<T> Seq2AU<T>::teacher_forced(const Example& input) const {
  if (input.targets.empty()) throw EmptyInputError("teacher-forced unroll needs targets");
  return unroll(input, true);
}

template class Seq2AU<float>;
template class Seq2AU<double>;

}  // namespace anchor::seq2au
