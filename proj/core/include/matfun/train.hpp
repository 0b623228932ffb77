#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matfun/datagen.hpp"
#include "matfun/metrics.hpp"
#include "matfun/models.hpp"

namespace matfun::nn {

enum class LossKind { rel_l1, frobenius, mse, cross_entropy };

std::string to_string(LossKind k);
LossKind parse_loss(const std::string& name);

// exp -> relative l1; other functions -> Frobenius for n > 1, MSE for n = 1.
LossKind regression_loss_for(MatrixFunction f, std::size_t n);
Var regression_loss(LossKind kind, Var pred, const Tensor& target, double eps = 1e-7);

// Linear warmup to `peak` over `warmup` steps, then peak * sqrt(warmup / s).
// warmup == 0 keeps the rate constant. Steps count from 1.
struct Schedule {
  double peak = 1e-3;
  std::size_t warmup = 0;
  [[nodiscard]] double rate(std::size_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip, 0 disables
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg, Schedule schedule);

  // Applies one update from the current Parameter::grad values.
  void step();
  [[nodiscard]] std::size_t steps() const { return step_; }
  [[nodiscard]] double last_rate() const { return last_rate_; }
  [[nodiscard]] const Tensor& first_moment(std::size_t i) const { return m_[i]; }
  [[nodiscard]] const Tensor& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  Schedule schedule_;
  std::vector<Tensor> m_, v_;
  std::size_t step_ = 0;
  double last_rate_ = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch = 64;
  Schedule schedule;
  AdamConfig adam;
  double holdout = 0.1;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;   // 0 means no cap
  std::size_t eval_limit = 0;  // held-out samples scored per epoch, 0 means all
  std::vector<double> taus{0.05, 0.02, 0.01, 0.005};
  double eps = metrics::kDefaultGuard;
  // Stop once held-out accuracy at taus[0] reaches this value (0 disables).
  double stop_accuracy = 0.0;
  std::function<void(const struct EpochRecord&)> on_epoch;
  // Checked after on_epoch; true ends training.
  std::function<bool(const struct EpochRecord&)> stop_when;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_loss = 0.0;
  double rate = 0.0;
  std::vector<double> heldout_accuracy;  // one per tau
  std::size_t heldout_malformed = 0;
  [[nodiscard]] nlohmann::json to_json() const;
};

struct TrainHistory {
  LossKind loss = LossKind::mse;
  std::size_t train_count = 0;
  std::size_t holdout_count = 0;
  std::vector<double> taus;
  std::vector<EpochRecord> epochs;
  [[nodiscard]] nlohmann::json to_json() const;
};

// Deterministic permutation split; the held-out part is the last
// round(holdout * count) positions (at least one when holdout > 0 and count > 1).
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};
Split split_indices(std::size_t count, double holdout, std::uint64_t seed);

// Fisher-Yates driven by CounterRng, so the order does not depend on the
// standard library.
void shuffle(std::vector<std::size_t>& v, CounterRng& rng);

// Rows of flattened inputs and targets.
Tensor stack_inputs(std::span<const data::Sample> samples, std::span<const std::size_t> idx);
Tensor stack_targets(std::span<const data::Sample> samples, std::span<const std::size_t> idx);

TrainHistory train_regression(RegressionModel& model, std::span<const data::Sample> samples, LossKind loss,
                              const TrainConfig& cfg);

metrics::EvalErrors evaluate_regression(RegressionModel& model, std::span<const data::Sample> samples,
                                        std::span<const std::size_t> idx, double eps = metrics::kDefaultGuard);

struct SeqPair {
  TokenSeq src;
  TokenSeq tgt;  // ends with <EOS>
};
SeqPair tokenize(const data::Sample& s, codec::Scheme scheme);

// Decoder input [<BOS>, t0, ..., t_{L-2}] for target t.
TokenSeq shift_right(const TokenSeq& tgt, codec::Scheme scheme);

TrainHistory train_seq2seq(EncoderDecoder& model, std::span<const data::Sample> samples, const TrainConfig& cfg);

struct Decoded {
  TokenSeq tokens;  // generated tokens, <EOS> included when produced
  std::optional<Matrix> matrix;
  std::string error;  // why the output is malformed
};

// Autoregressive argmax from <BOS> until <EOS> or `max_new` tokens. Output
// that does not parse under the model's scheme is returned with error set.
std::vector<Decoded> greedy_decode(EncoderDecoder& model, const std::vector<TokenSeq>& src, std::size_t max_new,
                                   std::optional<std::size_t> n = std::nullopt);

struct Seq2SeqEval {
  metrics::EvalErrors errors;
  std::size_t exact = 0;  // generated sequence equals the target encoding
};
Seq2SeqEval evaluate_seq2seq(EncoderDecoder& model, std::span<const data::Sample> samples,
                             std::span<const std::size_t> idx, std::size_t batch = 64,
                             double eps = metrics::kDefaultGuard);

// Named training setups. "paper" carries the published hyperparameters,
// "desk" is sized for one CPU. `samples` is the default dataset size.
struct Preset {
  std::string name;
  std::string arch;
  std::size_t epochs = 0;
  std::size_t batch = 0;
  std::size_t samples = 0;
  Schedule schedule;
  nlohmann::json model;  // input to make_model
};

Preset make_preset(const std::string& preset, const std::string& arch, std::size_t n, codec::Scheme scheme,
                   std::uint64_t seed);

}  // namespace matfun::nn
