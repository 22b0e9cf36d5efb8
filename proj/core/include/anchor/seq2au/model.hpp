#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "anchor/core/config.hpp"
#include "anchor/core/random.hpp"
#include "anchor/core/types.hpp"
#include "anchor/nn/adam.hpp"
#include "anchor/nn/tape.hpp"
#include "anchor/text/frontend.hpp"

namespace anchor::seq2au {

// One training sequence: word vectors in, normalized AU+PS per frame out.
struct Example {
  std::vector<text::Token> tokens;
  std::vector<std::vector<float>> vectors;
  std::vector<core::AUPSVector> targets;
};

Example make_example(const core::SampleRecord& record, const text::EmbeddingTable& table);

struct LossReport {
  double mse = 0.0;       // mean over valid steps and the 20 dims
  double stop_bce = 0.0;  // mean over valid steps
  double total = 0.0;     // mse + lambda_stop * stop_bce
};

struct Feedback {
  core::Rng* rng = nullptr;
  double teacher_ratio = 1.0;
};

template <typename T>
struct Inference {
  std::vector<core::AUPSVector> aups;
  std::vector<double> stop_prob;
  std::vector<std::vector<T>> hidden;  // top decoder layer, one per emitted frame
  bool stopped = false;                // false when cut off at t_max
};

// LSTM encoder -> linear -> h_enc; LSTM decoder fed [h_enc ; y_prev] with
// initial hidden tanh(linear(h_enc)); 21-way head (17 sigmoid AU, 3 tanh
// pose, 1 stop logit).
template <typename T>
class Seq2AU {
 public:
  using Var = nn::Var<T>;

  struct State {
    std::vector<Var> h, c;  // per layer, (B, hidden)
  };
  struct Encoded {
    Var h_enc;                 // (B, hidden)
    std::vector<Var> hiddens;  // top encoder layer per word
  };
  struct Step {
    State state;
    Var y;     // (B, 20), squashed
    Var stop;  // (B, 1) logit
  };
  // Parameter handles for one tape; trainable binds record gradients.
  struct Bound {
    std::vector<Var> vars;
    bool trainable = false;
  };

  Seq2AU(const core::Seq2AUConfig& config, int embed_dim, std::uint64_t seed);

  // Registers "embed.<word>" parameters initialized from the table; used when
  // config.finetune_embeddings is set.
  void add_embedding_params(const text::EmbeddingTable& table,
                            std::span<const std::string> words);

  const core::Seq2AUConfig& config() const { return config_; }
  int embed_dim() const { return embed_dim_; }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

  Bound bind(nn::Tape<T>& tape, bool trainable);

  // Encoder over a batch; rows shorter than the longest keep their final state.
  Encoded encode(nn::Tape<T>& tape, const Bound& b, std::span<const Example* const> batch) const;
  State initial_state(nn::Tape<T>& tape, const Bound& b, const Var& h_enc) const;
  Step decode_step(nn::Tape<T>& tape, const Bound& b, const State& prev, const Var& h_enc,
                   const Var& y_prev) const;

  // Masked loss over a batch (scalar Var) and its components. Teacher-forced
  // unless `feedback` has an rng and a ratio below 1: then at each step every
  // row is fed its own detached previous output with probability 1 - ratio.
  Var loss(nn::Tape<T>& tape, const Bound& b, std::span<const Example* const> batch,
           LossReport* report, const Feedback& feedback = {}) const;

  // One optimizer update on the batch.
  LossReport train_step(std::span<const Example* const> batch, nn::Adam<T>& opt,
                        const Feedback& feedback = {});

  // Greedy free-running decode until sigmoid(stop) > 0.5 or t_max frames.
  Inference<T> infer(const Example& input) const;
  // Teacher-forced unroll over input.targets, reporting the same fields.
  Inference<T> teacher_forced(const Example& input) const;

 private:
  struct LayerIds {
    nn::ParamId w_ih, w_hh, b;
  };
  Var lstm(nn::Tape<T>& tape, const Bound& b, const LayerIds& ids, const Var& x, Var& h,
           Var& c) const;
  Var word_inputs(nn::Tape<T>& tape, const Bound& b, std::span<const Example* const> batch,
                  std::size_t t) const;
  Inference<T> unroll(const Example& input, bool teacher) const;

  core::Seq2AUConfig config_;
  int embed_dim_;
  nn::ParamStore<T> params_;
  std::vector<LayerIds> enc_, dec_;
  nn::ParamId enc_out_w_, enc_out_b_, head_w_, head_b_;
  std::vector<nn::ParamId> init_w_, init_b_;
  std::unordered_map<std::string, nn::ParamId> embed_ids_;
};

}  // namespace anchor::seq2au
