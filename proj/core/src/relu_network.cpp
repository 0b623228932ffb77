#include "matfun/relu_network.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <limits>
#include <string>

#include "matfun/errors.hpp"

namespace matfun::relu {

static_assert(std::endian::native == std::endian::little, "network files are little-endian");

namespace {

constexpr const char* kMagic = "MATFUN-RELU 1";

void require_canonical(const ReluNetwork& net, const char* op) {
  const auto& layers = net.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    require(layers[i].activation == Activation::relu, ErrorKind::invalid_argument,
            std::string(op) + ": hidden layers must use ReLU");
  }
}

Layer carry_layer(const Layer& last) {
  // [W; -W], [b; -b] with ReLU, so that relu(y) - relu(-y) = y.
  const std::size_t out = last.out_dim;
  LayerBuilder builder(2 * out, last.in_dim);
  for (std::size_t r = 0; r < out; ++r) {
    for (std::uint64_t k = last.row_ptr[r]; k < last.row_ptr[r + 1]; ++k) {
      builder.add(r, last.col[k], last.val[k]);
      builder.add(out + r, last.col[k], -last.val[k]);
    }
    builder.set_bias(r, last.bias[r]);
    builder.set_bias(out + r, -last.bias[r]);
  }
  return std::move(builder).build(Activation::relu);
}

Layer uncarry_layer(std::size_t out) {
  LayerBuilder builder(out, 2 * out);
  for (std::size_t r = 0; r < out; ++r) {
    builder.add(r, r, 1.0);
    builder.add(r, out + r, -1.0);
  }
  return std::move(builder).build(Activation::identity);
}

// outer_first(inner_last(x)) as a single affine layer with outer_first's activation.
Layer merge_affine(const Layer& outer, const Layer& inner) {
  require(outer.in_dim == inner.out_dim, ErrorKind::dimension_mismatch,
          "serial: inner output " + std::to_string(inner.out_dim) + " != outer input " +
              std::to_string(outer.in_dim));
  Layer merged;
  merged.in_dim = inner.in_dim;
  merged.out_dim = outer.out_dim;
  merged.activation = outer.activation;
  merged.row_ptr.assign(outer.out_dim + 1, 0);
  merged.bias.assign(outer.out_dim, 0.0);

  std::vector<double> acc(inner.in_dim, 0.0);
  std::vector<char> touched(inner.in_dim, 0);
  std::vector<std::uint32_t> touched_cols;
  for (std::size_t r = 0; r < outer.out_dim; ++r) {
    double b = outer.bias[r];
    touched_cols.clear();
    for (std::uint64_t k = outer.row_ptr[r]; k < outer.row_ptr[r + 1]; ++k) {
      const std::uint32_t mid = outer.col[k];
      const double w = outer.val[k];
      b += w * inner.bias[mid];
      for (std::uint64_t q = inner.row_ptr[mid]; q < inner.row_ptr[mid + 1]; ++q) {
        const std::uint32_t c = inner.col[q];
        if (!touched[c]) {
          touched[c] = 1;
          touched_cols.push_back(c);
        }
        acc[c] += w * inner.val[q];
      }
    }
    std::sort(touched_cols.begin(), touched_cols.end());
    for (std::uint32_t c : touched_cols) {
      if (acc[c] != 0.0) {
        merged.col.push_back(c);
        merged.val.push_back(acc[c]);
      }
      acc[c] = 0.0;
      touched[c] = 0;
    }
    merged.bias[r] = b;
    merged.row_ptr[r + 1] = merged.val.size();
  }
  return merged;
}

template <class T>
void write_array(std::ofstream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
void read_array(std::ifstream& in, std::vector<T>& v, std::size_t count, const std::string& path) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  require(static_cast<std::size_t>(in.gcount()) == count * sizeof(T), ErrorKind::io_error,
          "read_network: truncated blob in " + path);
}

}  // namespace

Layer Layer::dense(const std::vector<std::vector<double>>& weights, std::vector<double> bias, Activation act) {
  require(!weights.empty(), ErrorKind::invalid_argument, "Layer::dense: no rows");
  const std::size_t out = weights.size();
  const std::size_t in = weights.front().size();
  LayerBuilder builder(out, in);
  for (std::size_t r = 0; r < out; ++r) {
    require(weights[r].size() == in, ErrorKind::dimension_mismatch, "Layer::dense: ragged rows");
    for (std::size_t c = 0; c < in; ++c) builder.add(r, c, weights[r][c]);
  }
  if (!bias.empty()) {
    require(bias.size() == out, ErrorKind::dimension_mismatch, "Layer::dense: bias size");
    for (std::size_t r = 0; r < out; ++r) builder.set_bias(r, bias[r]);
  }
  return std::move(builder).build(act);
}

LayerBuilder::LayerBuilder(std::size_t out_dim, std::size_t in_dim)
    : out_dim_(out_dim), in_dim_(in_dim), bias_(out_dim, 0.0) {
  require(in_dim <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::resource_exhausted,
          "LayerBuilder: input dimension exceeds 32-bit column index");
}

void LayerBuilder::add(std::size_t row, std::size_t col, double value) {
  require(row < out_dim_ && col < in_dim_, ErrorKind::dimension_mismatch, "LayerBuilder::add: index out of range");
  entries_.push_back({row, col, value});
}

void LayerBuilder::set_bias(std::size_t row, double value) {
  require(row < out_dim_, ErrorKind::dimension_mismatch, "LayerBuilder::set_bias: row out of range");
  bias_[row] = value;
}

Layer LayerBuilder::build(Activation act) && {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  Layer layer;
  layer.in_dim = in_dim_;
  layer.out_dim = out_dim_;
  layer.activation = act;
  layer.bias = std::move(bias_);
  layer.row_ptr.assign(out_dim_ + 1, 0);
  std::size_t i = 0;
  for (std::size_t r = 0; r < out_dim_; ++r) {
    while (i < entries_.size() && entries_[i].row == r) {
      const std::size_t c = entries_[i].col;
      double v = 0.0;
      while (i < entries_.size() && entries_[i].row == r && entries_[i].col == c) v += entries_[i++].value;
      if (v != 0.0) {
        layer.col.push_back(static_cast<std::uint32_t>(c));
        layer.val.push_back(v);
      }
    }
    layer.row_ptr[r + 1] = layer.val.size();
  }
  return layer;
}

ReluNetwork::ReluNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorKind::invalid_argument, "ReluNetwork: no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    require(l.row_ptr.size() == l.out_dim + 1 && l.bias.size() == l.out_dim && l.col.size() == l.val.size() &&
                l.row_ptr.back() == l.val.size(),
            ErrorKind::invalid_argument, "ReluNetwork: malformed layer " + std::to_string(i));
    for (std::uint32_t c : l.col)
      require(c < l.in_dim, ErrorKind::invalid_argument, "ReluNetwork: column out of range in layer " + std::to_string(i));
    if (i > 0) {
      require(layers_[i - 1].out_dim == l.in_dim, ErrorKind::dimension_mismatch,
              "ReluNetwork: layer " + std::to_string(i) + " does not compose with its predecessor");
    }
  }
  require(layers_.back().activation == Activation::identity, ErrorKind::invalid_argument,
          "ReluNetwork: final layer must have identity activation");
}

std::size_t ReluNetwork::width() const noexcept {
  std::size_t w = 0;
  for (const Layer& l : layers_) w = std::max(w, l.out_dim);
  return w;
}

std::size_t ReluNetwork::depth() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(layers_.begin(), layers_.end(), [](const Layer& l) { return l.activation == Activation::relu; }));
}

std::size_t ReluNetwork::weight_count() const noexcept {
  std::size_t total = 0;
  for (const Layer& l : layers_) total += l.nnz() + l.out_dim;
  return total;
}

std::span<const double> Evaluator::operator()(std::span<const double> x) {
  const ReluNetwork& net = *net_;
  require(x.size() == net.input_dim(), ErrorKind::dimension_mismatch,
          "forward_eval: input length " + std::to_string(x.size()) + " != " + std::to_string(net.input_dim()));
  a_.assign(x.begin(), x.end());
  for (const Layer& layer : net.layers()) {
    b_.resize(layer.out_dim);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      double s = layer.bias[r];
      for (std::uint64_t k = layer.row_ptr[r]; k < layer.row_ptr[r + 1]; ++k) s += layer.val[k] * a_[layer.col[k]];
      if (layer.activation == Activation::relu) s = std::max(s, 0.0);
      b_[r] = s;
    }
    std::swap(a_, b_);
  }
  return a_;
}

std::vector<double> forward_eval(const ReluNetwork& net, std::span<const double> x) {
  Evaluator eval(net);
  const auto y = eval(x);
  return {y.begin(), y.end()};
}

ReluNetwork affine(std::size_t in_dim, std::size_t out_dim, const std::vector<Triplet>& weights,
                   std::vector<double> bias) {
  LayerBuilder builder(out_dim, in_dim);
  for (const Triplet& t : weights) builder.add(t.row, t.col, t.value);
  if (!bias.empty()) {
    require(bias.size() == out_dim, ErrorKind::dimension_mismatch, "affine: bias size");
    for (std::size_t r = 0; r < out_dim; ++r) builder.set_bias(r, bias[r]);
  }
  std::vector<Layer> layers;
  layers.push_back(std::move(builder).build(Activation::identity));
  return ReluNetwork(std::move(layers));
}

ReluNetwork selector(std::size_t in_dim, std::span<const std::size_t> indices) {
  std::vector<Triplet> w;
  w.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) w.push_back({i, indices[i], 1.0});
  return affine(in_dim, indices.size(), w);
}

ReluNetwork serial(const ReluNetwork& outer, const ReluNetwork& inner) {
  const auto& in_layers = inner.layers();
  const auto& out_layers = outer.layers();
  std::vector<Layer> layers;
  layers.reserve(in_layers.size() + out_layers.size() - 1);
  for (std::size_t i = 0; i + 1 < in_layers.size(); ++i) layers.push_back(in_layers[i]);
  layers.push_back(merge_affine(out_layers.front(), in_layers.back()));
  for (std::size_t i = 1; i < out_layers.size(); ++i) layers.push_back(out_layers[i]);
  return ReluNetwork(std::move(layers));
}

ReluNetwork pad_to_depth(ReluNetwork net, std::size_t depth) {
  require(net.depth() <= depth, ErrorKind::invalid_argument, "pad_to_depth: network already deeper than target");
  if (net.depth() == depth) return net;
  std::vector<Layer> layers = net.layers();
  while (layers.size() - 1 < depth) {
    const std::size_t out = layers.back().out_dim;
    Layer carried = carry_layer(layers.back());
    layers.back() = std::move(carried);
    layers.push_back(uncarry_layer(out));
  }
  ReluNetwork padded(std::move(layers));
  require_canonical(padded, "pad_to_depth");
  return padded;
}

ReluNetwork parallel(std::span<const ReluNetwork> nets) {
  require(!nets.empty(), ErrorKind::invalid_argument, "parallel: no networks");
  const std::size_t in_dim = nets.front().input_dim();
  const std::size_t n_layers = nets.front().layers().size();
  for (const ReluNetwork& net : nets) {
    require(net.input_dim() == in_dim, ErrorKind::dimension_mismatch, "parallel: input dimensions differ");
    require(net.layers().size() == n_layers, ErrorKind::invalid_argument, "parallel: depths differ");
    require_canonical(net, "parallel");
  }

  std::vector<Layer> layers(n_layers);
  for (std::size_t li = 0; li < n_layers; ++li) {
    Layer& out = layers[li];
    out.activation = nets.front().layers()[li].activation;
    out.row_ptr.push_back(0);
    std::size_t col_offset = 0;
    std::size_t nnz = 0;
    for (const ReluNetwork& net : nets) nnz += net.layers()[li].nnz();
    out.col.reserve(nnz);
    out.val.reserve(nnz);
    for (const ReluNetwork& net : nets) {
      const Layer& l = net.layers()[li];
      const std::uint64_t base = out.val.size();
      const std::size_t shift = li == 0 ? 0 : col_offset;
      for (std::uint32_t c : l.col) out.col.push_back(static_cast<std::uint32_t>(c + shift));
      out.val.insert(out.val.end(), l.val.begin(), l.val.end());
      for (std::size_t r = 0; r < l.out_dim; ++r) out.row_ptr.push_back(base + l.row_ptr[r + 1]);
      out.bias.insert(out.bias.end(), l.bias.begin(), l.bias.end());
      out.out_dim += l.out_dim;
      col_offset += l.in_dim;
    }
    out.in_dim = li == 0 ? in_dim : layers[li - 1].out_dim;
    require(out.in_dim <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::resource_exhausted,
            "parallel: layer too wide for 32-bit column index");
  }
  return ReluNetwork(std::move(layers));
}

ReluNetwork parallel_padded(std::vector<ReluNetwork> nets) {
  std::size_t depth = 0;
  for (const ReluNetwork& net : nets) depth = std::max(depth, net.depth());
  for (ReluNetwork& net : nets) net = pad_to_depth(std::move(net), depth);
  return parallel(nets);
}

ReluNetwork remap_inputs(const ReluNetwork& net, std::size_t new_input_dim, std::span<const std::size_t> mapping) {
  const Layer& first = net.layers().front();
  require(mapping.size() == first.in_dim, ErrorKind::dimension_mismatch, "remap_inputs: mapping size");
  LayerBuilder builder(first.out_dim, new_input_dim);
  for (std::size_t r = 0; r < first.out_dim; ++r) {
    for (std::uint64_t k = first.row_ptr[r]; k < first.row_ptr[r + 1]; ++k)
      builder.add(r, mapping[first.col[k]], first.val[k]);
    builder.set_bias(r, first.bias[r]);
  }
  std::vector<Layer> layers = net.layers();
  layers.front() = std::move(builder).build(first.activation);
  return ReluNetwork(std::move(layers));
}

void write_network(const std::filesystem::path& path, const ReluNetwork& net, const nlohmann::json& metadata) {
  nlohmann::json header;
  header["format"] = "matfun-relu";
  header["version"] = 1;
  header["input_dim"] = net.input_dim();
  header["output_dim"] = net.output_dim();
  header["width"] = net.width();
  header["depth"] = net.depth();
  header["weight_count"] = net.weight_count();
  header["blob"] = "per layer: row_ptr u64[out+1], col u32[nnz], val f64[nnz], bias f64[out]; little-endian";
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : net.layers()) {
    layers.push_back({{"in", l.in_dim},
                      {"out", l.out_dim},
                      {"nnz", l.nnz()},
                      {"activation", l.activation == Activation::relu ? "relu" : "identity"}});
  }
  header["layers"] = std::move(layers);
  header["metadata"] = metadata;

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io_error, "write_network: cannot open " + path.string());
  out << kMagic << '\n' << header.dump() << '\n';
  for (const Layer& l : net.layers()) {
    write_array(out, l.row_ptr);
    write_array(out, l.col);
    write_array(out, l.val);
    write_array(out, l.bias);
  }
  require(static_cast<bool>(out), ErrorKind::io_error, "write_network: write failed for " + path.string());
}

LoadedNetwork read_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_error, "read_network: cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  require(magic == kMagic, ErrorKind::io_error, "read_network: bad magic in " + path.string());
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io_error, "read_network: corrupt header in " + path.string() + ": " + e.what());
  }
  std::vector<Layer> layers;
  for (const auto& meta : header.at("layers")) {
    Layer l;
    l.in_dim = meta.at("in").get<std::size_t>();
    l.out_dim = meta.at("out").get<std::size_t>();
    const std::size_t nnz = meta.at("nnz").get<std::size_t>();
    l.activation = meta.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::identity;
    read_array(in, l.row_ptr, l.out_dim + 1, path.string());
    read_array(in, l.col, nnz, path.string());
    read_array(in, l.val, nnz, path.string());
    read_array(in, l.bias, l.out_dim, path.string());
    layers.push_back(std::move(l));
  }
  return {ReluNetwork(std::move(layers)), header.value("metadata", nlohmann::json::object())};
}

}  // namespace matfun::relu
