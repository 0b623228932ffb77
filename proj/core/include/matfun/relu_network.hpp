#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace matfun::relu {

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

// One affine map followed by an activation. Weights are stored sparsely in
// compressed row form because the explicit constructions are overwhelmingly
// block diagonal.
struct Layer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<std::uint64_t> row_ptr;  // out_dim + 1 offsets into col/val
  std::vector<std::uint32_t> col;
  std::vector<double> val;
  std::vector<double> bias;  // out_dim
  Activation activation = Activation::identity;

  [[nodiscard]] std::size_t nnz() const noexcept { return val.size(); }

  static Layer dense(const std::vector<std::vector<double>>& weights, std::vector<double> bias, Activation act);
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

// Accumulates (row, col, value) entries and emits a canonical CSR layer:
// rows sorted, duplicate columns summed, exact zeros dropped.
class LayerBuilder {
 public:
  LayerBuilder(std::size_t out_dim, std::size_t in_dim);
  void add(std::size_t row, std::size_t col, double value);
  void set_bias(std::size_t row, double value);
  [[nodiscard]] Layer build(Activation act) &&;

 private:
  std::size_t out_dim_;
  std::size_t in_dim_;
  std::vector<Triplet> entries_;
  std::vector<double> bias_;
};

// A feed-forward network of affine layers with ReLU or identity activations.
// The last layer always has identity activation. Depth counts ReLU layers.
class ReluNetwork {
 public:
  ReluNetwork() = default;
  explicit ReluNetwork(std::vector<Layer> layers);

  [[nodiscard]] std::size_t input_dim() const noexcept { return layers_.front().in_dim; }
  [[nodiscard]] std::size_t output_dim() const noexcept { return layers_.back().out_dim; }
  [[nodiscard]] std::size_t width() const noexcept;
  [[nodiscard]] std::size_t depth() const noexcept;
  [[nodiscard]] std::size_t weight_count() const noexcept;  // nonzero weights plus biases
  [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }
  [[nodiscard]] bool empty() const noexcept { return layers_.empty(); }

 private:
  std::vector<Layer> layers_;
};

// Exact composition of affine maps and elementwise max(0, .).
std::vector<double> forward_eval(const ReluNetwork& net, std::span<const double> x);

// Reusable scratch buffers for repeated evaluation on one thread.
class Evaluator {
 public:
  explicit Evaluator(const ReluNetwork& net) : net_(&net) {}
  std::span<const double> operator()(std::span<const double> x);

 private:
  const ReluNetwork* net_;
  std::vector<double> a_;
  std::vector<double> b_;
};

// ---- composition ----

// Depth-0 network y = W x + b.
ReluNetwork affine(std::size_t in_dim, std::size_t out_dim, const std::vector<Triplet>& weights,
                   std::vector<double> bias = {});
// y_i = x[indices[i]]
ReluNetwork selector(std::size_t in_dim, std::span<const std::size_t> indices);

// outer(inner(x)); the last affine map of `inner` is folded into the first of `outer`.
ReluNetwork serial(const ReluNetwork& outer, const ReluNetwork& inner);

// Appends ReLU carry layers (y = relu(y) - relu(-y)) until depth reaches `depth`.
ReluNetwork pad_to_depth(ReluNetwork net, std::size_t depth);

// All networks read the same input and must have equal depth; outputs are concatenated.
ReluNetwork parallel(std::span<const ReluNetwork> nets);

// Same as parallel() but pads shallower members first.
ReluNetwork parallel_padded(std::vector<ReluNetwork> nets);

// Rewrites the first layer so that former input column c reads column mapping[c]
// of a new input of dimension `new_input_dim`.
ReluNetwork remap_inputs(const ReluNetwork& net, std::size_t new_input_dim, std::span<const std::size_t> mapping);

// ---- persistence ----

// Binary container: a magic line, one line of JSON header (dimensions, per-layer
// metadata and the caller's metadata object), then per layer the raw
// little-endian arrays row_ptr (u64), col (u32), val (f64) and bias (f64).
void write_network(const std::filesystem::path& path, const ReluNetwork& net, const nlohmann::json& metadata);

struct LoadedNetwork {
  ReluNetwork net;
  nlohmann::json metadata;
};
LoadedNetwork read_network(const std::filesystem::path& path);

}  // namespace matfun::relu
