#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matfun/autodiff.hpp"
#include "matfun/codec.hpp"

namespace matfun::nn {

// Owns parameters at stable addresses, in creation order (which is also the
// checkpoint order).
class ParameterSet {
 public:
  // Weights drawn U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from the "init" stream
  // of `seed`, indexed by creation order.
  Parameter& uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double fan_in);
  Parameter& filled(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);
  Parameter& normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double sigma, bool trainable);

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  [[nodiscard]] std::vector<Parameter*> all();
  [[nodiscard]] std::vector<Parameter*> trainable();
  [[nodiscard]] Parameter* find(const std::string& name);
  [[nodiscard]] std::size_t scalar_count() const;
  void zero_grad();

 private:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  std::deque<Parameter> params_;
  std::uint64_t seed_ = 0;
};

// Train mode enables dropout; the rng is the only source of randomness in a
// forward pass.
struct ForwardMode {
  bool train = false;
  CounterRng* rng = nullptr;
};

// Layers hold pointers into params_, so models are neither copied nor moved.
class Model {
 public:
  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  virtual ~Model() = default;
  [[nodiscard]] virtual std::string arch() const = 0;
  [[nodiscard]] virtual nlohmann::json config() const = 0;
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 protected:
  ParameterSet params_;
};

// Maps a batch of flattened n x n inputs (rows) to flattened outputs.
class RegressionModel : public Model {
 public:
  [[nodiscard]] virtual std::size_t n() const = 0;
  virtual Var forward(Tape& tape, const Tensor& x, const ForwardMode& mode) = 0;
  Tensor predict(const Tensor& x);
};

struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out
  Var operator()(Tape& t, Var x) const;
};
Linear make_linear(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out);

struct MlpConfig {
  std::size_t n = 1;
  std::vector<std::size_t> widths;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  static MlpConfig shallow(std::size_t n);  // 128, 256, 128
  static MlpConfig deep(std::size_t n);     // 128, 256, 512, 1024, 512, 256, 128; dropout 0.2
  void validate() const;
};

class Mlp final : public RegressionModel {
 public:
  explicit Mlp(MlpConfig cfg, std::string arch = "mlp");
  [[nodiscard]] std::string arch() const override { return arch_; }
  [[nodiscard]] nlohmann::json config() const override;
  [[nodiscard]] std::size_t n() const override { return cfg_.n; }
  Var forward(Tape& tape, const Tensor& x, const ForwardMode& mode) override;
  [[nodiscard]] const MlpConfig& cfg() const { return cfg_; }

 private:
  MlpConfig cfg_;
  std::string arch_;
  std::vector<Linear> layers_;
};

struct MhaParams {
  Linear q, k, v, o;
  Eigen::Index heads = 1;
};
MhaParams make_mha(ParameterSet& ps, const std::string& name, Eigen::Index dim, Eigen::Index heads);
// Projects xq (batch*Lq rows) and xkv (batch*Lk rows), attends per head, then
// applies the output projection.
Var multi_head(Tape& t, Var xq, Var xkv, const MhaParams& p, Eigen::Index batch, bool causal);

// Closest divisor of `dim` to `wanted`, preferring the smaller on ties.
std::size_t nearest_divisor(std::size_t dim, std::size_t wanted);

struct FourierConfig {
  std::size_t n = 1;
  std::size_t features = 16;  // rows of B
  double sigma = 1.0;
  std::size_t layers = 2;
  std::size_t heads_requested = 0;  // 0 means n*n
  std::size_t dim = 64;
  std::size_t ff_dim = 0;  // 0 means 4 * dim
  double dropout = 0.0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t heads() const;
  void validate() const;
};

// Each of the n*n entries is one token: gamma(x) = [cos(2 pi B x), sin(2 pi B x)]
// with fixed B ~ N(0, sigma^2), a linear lift, learned positions, pre-norm
// encoder blocks and a per-token scalar readout.
class FourierEncoder final : public RegressionModel {
 public:
  explicit FourierEncoder(FourierConfig cfg);
  [[nodiscard]] std::string arch() const override { return "fourier-enc"; }
  [[nodiscard]] nlohmann::json config() const override;
  [[nodiscard]] std::size_t n() const override { return cfg_.n; }
  Var forward(Tape& tape, const Tensor& x, const ForwardMode& mode) override;
  [[nodiscard]] const Parameter& frequencies() const { return *b_; }

 private:
  struct Block {
    Parameter *ln1_g, *ln1_b, *ln2_g, *ln2_b;
    MhaParams attn;
    Linear ff1, ff2;
  };
  FourierConfig cfg_;
  Parameter* b_ = nullptr;
  Linear lift_;
  Parameter* pos_ = nullptr;
  std::vector<Block> blocks_;
  Parameter *lnf_g_ = nullptr, *lnf_b_ = nullptr;
  Linear head_;
};

// Standalone Fourier lift of an r x 1 column: r x 2m.
Var fourier_features(Tape& t, Var x, const Tensor& b);

struct TransformerConfig {
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 1;
  std::size_t heads = 4;
  std::size_t dim = 64;
  std::size_t ff_dim = 0;  // 0 means 4 * dim
  std::size_t max_len = 128;
  double dropout = 0.0;
  codec::Scheme scheme = codec::Scheme::P1000;
  std::uint64_t seed = 0;

  static TransformerConfig desk(codec::Scheme s);
  static TransformerConfig paper(codec::Scheme s);
  [[nodiscard]] std::size_t vocab_size() const;
  void validate() const;
};

using TokenSeq = std::vector<codec::TokenId>;

// Pre-norm encoder-decoder with learned positions and a separate output head.
class EncoderDecoder final : public Model {
 public:
  explicit EncoderDecoder(TransformerConfig cfg);
  [[nodiscard]] std::string arch() const override { return "encdec"; }
  [[nodiscard]] nlohmann::json config() const override;
  [[nodiscard]] const TransformerConfig& cfg() const { return cfg_; }

  // All sequences in a batch must share one length.
  Var encode(Tape& t, const std::vector<TokenSeq>& src, const ForwardMode& mode);
  // Next-token logits, (batch * tgt_len) x vocab.
  Var decode(Tape& t, Var memory, std::size_t batch, const std::vector<TokenSeq>& tgt_in, const ForwardMode& mode);
  Var forward(Tape& t, const std::vector<TokenSeq>& src, const std::vector<TokenSeq>& tgt_in,
              const ForwardMode& mode);

 private:
  struct Block {
    Parameter *ln1_g, *ln1_b, *ln2_g, *ln2_b, *ln3_g, *ln3_b;
    MhaParams self_attn, cross_attn;
    Linear ff1, ff2;
  };
  Var embed(Tape& t, const std::vector<TokenSeq>& seqs, Parameter* pos);

  TransformerConfig cfg_;
  Parameter* tok_ = nullptr;
  Parameter* enc_pos_ = nullptr;
  Parameter* dec_pos_ = nullptr;
  std::vector<Block> enc_, dec_;
  Parameter *enc_ln_g_ = nullptr, *enc_ln_b_ = nullptr, *dec_ln_g_ = nullptr, *dec_ln_b_ = nullptr;
  Linear out_;
};

// "mlp3", "mlp7", "fourier-enc", "encdec".
std::unique_ptr<Model> make_model(const nlohmann::json& config);

// Text header "MATFUN-MODEL 1", one line of JSON (arch config plus a parameter
// index of name, shape and offset), then the raw little-endian float64 blob.
void save_checkpoint(const std::filesystem::path& path, Model& model, const nlohmann::json& extra = {});
struct Checkpoint {
  std::unique_ptr<Model> model;
  nlohmann::json extra;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace matfun::nn
