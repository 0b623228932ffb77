#include "matfun/models.hpp"

#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <numbers>

#include "matfun/errors.hpp"

namespace matfun::nn {

namespace {

constexpr const char* kMagic = "MATFUN-MODEL 1";

Var ln(Tape& t, Var x, Parameter* g, Parameter* b) { return layer_norm(x, t.param(*g), t.param(*b)); }

std::size_t or_default(std::size_t v, std::size_t fallback) { return v == 0 ? fallback : v; }

}  // namespace

Parameter& ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  require(find(name) == nullptr, ErrorKind::invalid_argument, "duplicate parameter name " + name);
  require(rows > 0 && cols > 0, ErrorKind::invalid_argument, "parameter " + name + " must have a positive shape");
  Parameter& p = params_.emplace_back();
  p.name = name;
  p.value.resize(rows, cols);
  p.zero_grad();
  return p;
}

Parameter& ParameterSet::uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double fan_in) {
  Parameter& p = add(name, rows, cols);
  CounterRng rng(seed_, "init", params_.size() - 1);
  const double bound = 1.0 / std::sqrt(fan_in);
  for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = bound * (2.0 * rng.uniform() - 1.0);
  return p;
}

Parameter& ParameterSet::filled(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  Parameter& p = add(name, rows, cols);
  p.value.setConstant(value);
  return p;
}

Parameter& ParameterSet::normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double sigma,
                                bool trainable) {
  Parameter& p = add(name, rows, cols);
  CounterRng rng(seed_, "init", params_.size() - 1);
  for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = sigma * rng.normal();
  p.trainable = trainable;
  return p;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParameterSet::trainable() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_)
    if (p.trainable) out.push_back(&p);
  return out;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (Parameter& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.zero_grad();
}

Tensor RegressionModel::predict(const Tensor& x) {
  Tape t;
  return forward(t, x, {}).value();
}

Var Linear::operator()(Tape& t, Var x) const { return add_row(matmul(x, t.param(*weight)), t.param(*bias)); }

Linear make_linear(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out) {
  Linear l;
  l.weight = &ps.uniform(name + ".weight", in, out, static_cast<double>(in));
  l.bias = &ps.uniform(name + ".bias", 1, out, static_cast<double>(in));
  return l;
}

MlpConfig MlpConfig::shallow(std::size_t n) { return {n, {128, 256, 128}, 0.0, 0}; }

MlpConfig MlpConfig::deep(std::size_t n) { return {n, {128, 256, 512, 1024, 512, 256, 128}, 0.2, 0}; }

void MlpConfig::validate() const {
  require(n >= 1 && n <= codec::kMaxDim, ErrorKind::invalid_argument, "mlp: n must lie in [1, 10]");
  for (std::size_t w : widths) require(w > 0, ErrorKind::invalid_argument, "mlp: widths must be positive");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::invalid_argument, "mlp: dropout must lie in [0, 1)");
}

Mlp::Mlp(MlpConfig cfg, std::string arch) : cfg_(std::move(cfg)), arch_(std::move(arch)) {
  cfg_.validate();
  params_.set_seed(cfg_.seed);
  auto in = static_cast<Eigen::Index>(cfg_.n * cfg_.n);
  for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
    const auto out = static_cast<Eigen::Index>(cfg_.widths[i]);
    layers_.push_back(make_linear(params_, "layers." + std::to_string(i), in, out));
    in = out;
  }
  layers_.push_back(make_linear(params_, "out", in, static_cast<Eigen::Index>(cfg_.n * cfg_.n)));
}

nlohmann::json Mlp::config() const {
  return {{"arch", arch_}, {"n", cfg_.n}, {"widths", cfg_.widths}, {"dropout", cfg_.dropout}, {"seed", cfg_.seed}};
}

Var Mlp::forward(Tape& t, const Tensor& x, const ForwardMode& mode) {
  require(x.cols() == static_cast<Eigen::Index>(cfg_.n * cfg_.n), ErrorKind::dimension_mismatch,
          "mlp: input has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(cfg_.n * cfg_.n));
  Var h = t.constant(x);
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = relu(layers_[i](t, h));
    if (mode.train) h = dropout(h, cfg_.dropout, mode.rng);
  }
  return layers_.back()(t, h);
}

MhaParams make_mha(ParameterSet& ps, const std::string& name, Eigen::Index dim, Eigen::Index heads) {
  require(heads > 0 && dim % heads == 0, ErrorKind::invalid_argument,
          name + ": embedding dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  return {make_linear(ps, name + ".q", dim, dim), make_linear(ps, name + ".k", dim, dim),
          make_linear(ps, name + ".v", dim, dim), make_linear(ps, name + ".o", dim, dim), heads};
}

Var multi_head(Tape& t, Var xq, Var xkv, const MhaParams& p, Eigen::Index batch, bool causal) {
  const Var q = p.q(t, xq);
  const Var k = p.k(t, xkv);
  const Var v = p.v(t, xkv);
  return p.o(t, attention(q, k, v, {batch, p.heads, causal}));
}

std::size_t nearest_divisor(std::size_t dim, std::size_t wanted) {
  require(dim > 0, ErrorKind::invalid_argument, "nearest_divisor: dim must be positive");
  std::size_t best = 1;
  for (std::size_t d = 1; d <= dim; ++d) {
    if (dim % d != 0) continue;
    const auto gap = [&](std::size_t c) { return c > wanted ? c - wanted : wanted - c; };
    if (gap(d) < gap(best)) best = d;
  }
  return best;
}

std::size_t FourierConfig::heads() const { return nearest_divisor(dim, or_default(heads_requested, n * n)); }

void FourierConfig::validate() const {
  require(n >= 1 && n <= codec::kMaxDim, ErrorKind::invalid_argument, "fourier-enc: n must lie in [1, 10]");
  require(features > 0 && layers > 0 && dim > 0, ErrorKind::invalid_argument,
          "fourier-enc: features, layers and dim must be positive");
  require(sigma >= 0.0, ErrorKind::invalid_argument, "fourier-enc: sigma must be non-negative");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::invalid_argument, "fourier-enc: dropout must lie in [0, 1)");
}

Var fourier_features(Tape& t, Var x, const Tensor& b) {
  const Var z = scale(matmul_bt(x, t.constant(b)), 2.0 * std::numbers::pi);
  return concat_cols(cos(z), sin(z));
}

FourierEncoder::FourierEncoder(FourierConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  params_.set_seed(cfg_.seed);
  const auto dim = static_cast<Eigen::Index>(cfg_.dim);
  const auto ff = static_cast<Eigen::Index>(or_default(cfg_.ff_dim, 4 * cfg_.dim));
  const auto heads = static_cast<Eigen::Index>(cfg_.heads());
  b_ = &params_.normal("fourier.B", static_cast<Eigen::Index>(cfg_.features), 1, cfg_.sigma, false);
  lift_ = make_linear(params_, "lift", 2 * static_cast<Eigen::Index>(cfg_.features), dim);
  pos_ = &params_.uniform("pos", static_cast<Eigen::Index>(cfg_.n * cfg_.n), dim, static_cast<double>(dim));
  for (std::size_t i = 0; i < cfg_.layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    Block b;
    b.ln1_g = &params_.filled(p + ".ln1.gain", 1, dim, 1.0);
    b.ln1_b = &params_.filled(p + ".ln1.bias", 1, dim, 0.0);
    b.attn = make_mha(params_, p + ".attn", dim, heads);
    b.ln2_g = &params_.filled(p + ".ln2.gain", 1, dim, 1.0);
    b.ln2_b = &params_.filled(p + ".ln2.bias", 1, dim, 0.0);
    b.ff1 = make_linear(params_, p + ".ff1", dim, ff);
    b.ff2 = make_linear(params_, p + ".ff2", ff, dim);
    blocks_.push_back(b);
  }
  lnf_g_ = &params_.filled("ln.gain", 1, dim, 1.0);
  lnf_b_ = &params_.filled("ln.bias", 1, dim, 0.0);
  head_ = make_linear(params_, "head", dim, 1);
}

nlohmann::json FourierEncoder::config() const {
  return {{"arch", "fourier-enc"},
          {"n", cfg_.n},
          {"features", cfg_.features},
          {"sigma", cfg_.sigma},
          {"layers", cfg_.layers},
          {"heads_requested", or_default(cfg_.heads_requested, cfg_.n * cfg_.n)},
          {"heads", cfg_.heads()},
          {"dim", cfg_.dim},
          {"ff_dim", or_default(cfg_.ff_dim, 4 * cfg_.dim)},
          {"dropout", cfg_.dropout},
          {"seed", cfg_.seed}};
}

Var FourierEncoder::forward(Tape& t, const Tensor& x, const ForwardMode& mode) {
  const auto nn = static_cast<Eigen::Index>(cfg_.n * cfg_.n);
  require(x.cols() == nn, ErrorKind::dimension_mismatch,
          "fourier-enc: input has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(nn));
  const Eigen::Index batch = x.rows();
  const Tensor col = Eigen::Map<const Tensor>(x.data(), batch * nn, 1);
  CounterRng* rng = mode.train ? mode.rng : nullptr;
  Var h = add_periodic(lift_(t, fourier_features(t, t.constant(col), b_->value)), t.param(*pos_));
  for (const Block& b : blocks_) {
    const Var a = ln(t, h, b.ln1_g, b.ln1_b);
    h = add(h, dropout(multi_head(t, a, a, b.attn, batch, false), cfg_.dropout, rng));
    const Var f = b.ff2(t, dropout(relu(b.ff1(t, ln(t, h, b.ln2_g, b.ln2_b))), cfg_.dropout, rng));
    h = add(h, dropout(f, cfg_.dropout, rng));
  }
  return reshape(head_(t, ln(t, h, lnf_g_, lnf_b_)), batch, nn);
}

TransformerConfig TransformerConfig::desk(codec::Scheme s) {
  TransformerConfig c;
  c.enc_layers = 2;
  c.dec_layers = 1;
  c.heads = 4;
  c.dim = 64;
  c.scheme = s;
  return c;
}

TransformerConfig TransformerConfig::paper(codec::Scheme s) {
  TransformerConfig c;
  c.enc_layers = 8;
  c.dec_layers = 1;
  c.heads = 8;
  c.dim = 512;
  c.max_len = 512;
  c.scheme = s;
  return c;
}

std::size_t TransformerConfig::vocab_size() const { return codec::vocab(scheme).size(); }

void TransformerConfig::validate() const {
  require(enc_layers > 0 && dec_layers > 0, ErrorKind::invalid_argument, "encdec: layer counts must be positive");
  require(heads > 0 && dim % heads == 0, ErrorKind::invalid_argument,
          "encdec: embedding dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  require(max_len > 0, ErrorKind::invalid_argument, "encdec: max_len must be positive");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::invalid_argument, "encdec: dropout must lie in [0, 1)");
}

EncoderDecoder::EncoderDecoder(TransformerConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  params_.set_seed(cfg_.seed);
  const auto dim = static_cast<Eigen::Index>(cfg_.dim);
  const auto ff = static_cast<Eigen::Index>(or_default(cfg_.ff_dim, 4 * cfg_.dim));
  const auto heads = static_cast<Eigen::Index>(cfg_.heads);
  const auto len = static_cast<Eigen::Index>(cfg_.max_len);
  tok_ = &params_.uniform("tok", static_cast<Eigen::Index>(cfg_.vocab_size()), dim, static_cast<double>(dim));
  enc_pos_ = &params_.uniform("enc.pos", len, dim, static_cast<double>(dim));
  dec_pos_ = &params_.uniform("dec.pos", len, dim, static_cast<double>(dim));
  auto block = [&](const std::string& p, bool cross) {
    Block b{};
    b.ln1_g = &params_.filled(p + ".ln1.gain", 1, dim, 1.0);
    b.ln1_b = &params_.filled(p + ".ln1.bias", 1, dim, 0.0);
    b.self_attn = make_mha(params_, p + ".self", dim, heads);
    if (cross) {
      b.ln3_g = &params_.filled(p + ".ln3.gain", 1, dim, 1.0);
      b.ln3_b = &params_.filled(p + ".ln3.bias", 1, dim, 0.0);
      b.cross_attn = make_mha(params_, p + ".cross", dim, heads);
    }
    b.ln2_g = &params_.filled(p + ".ln2.gain", 1, dim, 1.0);
    b.ln2_b = &params_.filled(p + ".ln2.bias", 1, dim, 0.0);
    b.ff1 = make_linear(params_, p + ".ff1", dim, ff);
    b.ff2 = make_linear(params_, p + ".ff2", ff, dim);
    return b;
  };
  for (std::size_t i = 0; i < cfg_.enc_layers; ++i) enc_.push_back(block("enc." + std::to_string(i), false));
  enc_ln_g_ = &params_.filled("enc.ln.gain", 1, dim, 1.0);
  enc_ln_b_ = &params_.filled("enc.ln.bias", 1, dim, 0.0);
  for (std::size_t i = 0; i < cfg_.dec_layers; ++i) dec_.push_back(block("dec." + std::to_string(i), true));
  dec_ln_g_ = &params_.filled("dec.ln.gain", 1, dim, 1.0);
  dec_ln_b_ = &params_.filled("dec.ln.bias", 1, dim, 0.0);
  out_ = make_linear(params_, "out", dim, static_cast<Eigen::Index>(cfg_.vocab_size()));
}

nlohmann::json EncoderDecoder::config() const {
  return {{"arch", "encdec"},
          {"enc_layers", cfg_.enc_layers},
          {"dec_layers", cfg_.dec_layers},
          {"heads", cfg_.heads},
          {"dim", cfg_.dim},
          {"ff_dim", or_default(cfg_.ff_dim, 4 * cfg_.dim)},
          {"max_len", cfg_.max_len},
          {"dropout", cfg_.dropout},
          {"scheme", codec::to_string(cfg_.scheme)},
          {"vocab", cfg_.vocab_size()},
          {"norm", "pre"},
          {"positions", "learned"},
          {"seed", cfg_.seed}};
}

Var EncoderDecoder::embed(Tape& t, const std::vector<TokenSeq>& seqs, Parameter* pos) {
  require(!seqs.empty(), ErrorKind::invalid_argument, "encdec: empty batch");
  const std::size_t len = seqs.front().size();
  require(len > 0 && len <= cfg_.max_len, ErrorKind::invalid_argument,
          "encdec: sequence length " + std::to_string(len) + " outside [1, " + std::to_string(cfg_.max_len) + "]");
  std::vector<int> ids;
  ids.reserve(seqs.size() * len);
  const auto vocab = static_cast<codec::TokenId>(cfg_.vocab_size());
  for (const TokenSeq& s : seqs) {
    require(s.size() == len, ErrorKind::dimension_mismatch, "encdec: sequences in a batch must share one length");
    for (codec::TokenId id : s) {
      require(id >= 0 && id < vocab, ErrorKind::invalid_argument,
              "encdec: token " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
      ids.push_back(id);
    }
  }
  const Var x = embedding(t.param(*tok_), ids);
  return add_periodic(x, slice_rows(t.param(*pos), 0, static_cast<Eigen::Index>(len)));
}

Var EncoderDecoder::encode(Tape& t, const std::vector<TokenSeq>& src, const ForwardMode& mode) {
  CounterRng* rng = mode.train ? mode.rng : nullptr;
  const auto batch = static_cast<Eigen::Index>(src.size());
  Var h = dropout(embed(t, src, enc_pos_), cfg_.dropout, rng);
  for (const Block& b : enc_) {
    const Var a = ln(t, h, b.ln1_g, b.ln1_b);
    h = add(h, dropout(multi_head(t, a, a, b.self_attn, batch, false), cfg_.dropout, rng));
    const Var f = b.ff2(t, dropout(relu(b.ff1(t, ln(t, h, b.ln2_g, b.ln2_b))), cfg_.dropout, rng));
    h = add(h, dropout(f, cfg_.dropout, rng));
  }
  return ln(t, h, enc_ln_g_, enc_ln_b_);
}

Var EncoderDecoder::decode(Tape& t, Var memory, std::size_t batch, const std::vector<TokenSeq>& tgt_in,
                           const ForwardMode& mode) {
  require(tgt_in.size() == batch, ErrorKind::dimension_mismatch, "encdec: source and target batch sizes differ");
  CounterRng* rng = mode.train ? mode.rng : nullptr;
  const auto b = static_cast<Eigen::Index>(batch);
  Var h = dropout(embed(t, tgt_in, dec_pos_), cfg_.dropout, rng);
  for (const Block& blk : dec_) {
    const Var a = ln(t, h, blk.ln1_g, blk.ln1_b);
    h = add(h, dropout(multi_head(t, a, a, blk.self_attn, b, true), cfg_.dropout, rng));
    const Var c = ln(t, h, blk.ln3_g, blk.ln3_b);
    h = add(h, dropout(multi_head(t, c, memory, blk.cross_attn, b, false), cfg_.dropout, rng));
    const Var f = blk.ff2(t, dropout(relu(blk.ff1(t, ln(t, h, blk.ln2_g, blk.ln2_b))), cfg_.dropout, rng));
    h = add(h, dropout(f, cfg_.dropout, rng));
  }
  return out_(t, ln(t, h, dec_ln_g_, dec_ln_b_));
}

Var EncoderDecoder::forward(Tape& t, const std::vector<TokenSeq>& src, const std::vector<TokenSeq>& tgt_in,
                            const ForwardMode& mode) {
  const Var memory = encode(t, src, mode);
  return decode(t, memory, src.size(), tgt_in, mode);
}

std::unique_ptr<Model> make_model(const nlohmann::json& c) {
  const std::string arch = c.at("arch").get<std::string>();
  const auto seed = c.value("seed", std::uint64_t{0});
  if (arch == "mlp3" || arch == "mlp7" || arch == "mlp") {
    MlpConfig m = arch == "mlp7" ? MlpConfig::deep(c.at("n").get<std::size_t>()) : MlpConfig::shallow(c.at("n").get<std::size_t>());
    if (c.contains("widths")) m.widths = c.at("widths").get<std::vector<std::size_t>>();
    m.dropout = c.value("dropout", m.dropout);
    m.seed = seed;
    return std::make_unique<Mlp>(m, arch);
  }
  if (arch == "fourier-enc") {
    FourierConfig f;
    f.n = c.at("n").get<std::size_t>();
    f.features = c.value("features", f.features);
    f.sigma = c.value("sigma", f.sigma);
    f.layers = c.value("layers", f.layers);
    f.heads_requested = c.value("heads_requested", f.heads_requested);
    f.dim = c.value("dim", f.dim);
    f.ff_dim = c.value("ff_dim", f.ff_dim);
    f.dropout = c.value("dropout", f.dropout);
    f.seed = seed;
    return std::make_unique<FourierEncoder>(f);
  }
  if (arch == "encdec") {
    TransformerConfig tc;
    tc.scheme = codec::parse_scheme(c.at("scheme").get<std::string>());
    tc.enc_layers = c.value("enc_layers", tc.enc_layers);
    tc.dec_layers = c.value("dec_layers", tc.dec_layers);
    tc.heads = c.value("heads", tc.heads);
    tc.dim = c.value("dim", tc.dim);
    tc.ff_dim = c.value("ff_dim", tc.ff_dim);
    tc.max_len = c.value("max_len", tc.max_len);
    tc.dropout = c.value("dropout", tc.dropout);
    tc.seed = seed;
    return std::make_unique<EncoderDecoder>(tc);
  }
  fail(ErrorKind::invalid_argument, "unknown architecture '" + arch + "' (mlp3, mlp7, fourier-enc, encdec)");
}

void save_checkpoint(const std::filesystem::path& path, Model& model, const nlohmann::json& extra) {
  nlohmann::json index = nlohmann::json::array();
  std::size_t offset = 0;
  for (Parameter* p : model.params().all()) {
    index.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"offset", offset}});
    offset += static_cast<std::size_t>(p->value.size());
  }
  const nlohmann::json header{{"config", model.config()}, {"params", index}, {"count", offset}, {"extra", extra}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + path.string());
  out << kMagic << '\n' << header.dump() << '\n';
  static_assert(std::endian::native == std::endian::little, "checkpoint blob assumes a little-endian host");
  for (Parameter* p : model.params().all())
    out.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * 8));
  require(static_cast<bool>(out), ErrorKind::io_error, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot open " + path.string());
  std::string magic, line;
  std::getline(in, magic);
  require(magic == kMagic, ErrorKind::io_error, path.string() + ": not a model checkpoint");
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::io_error, path.string() + ": missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io_error, path.string() + ": corrupt header: " + e.what());
  }
  Checkpoint ck{make_model(header.at("config")), header.value("extra", nlohmann::json{})};
  const auto params = ck.model->params().all();
  const auto& index = header.at("params");
  require(index.size() == params.size(), ErrorKind::io_error, path.string() + ": parameter count differs from config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const auto& e = index[i];
    require(e.at("name").get<std::string>() == p.name && e.at("rows").get<Eigen::Index>() == p.value.rows() &&
                e.at("cols").get<Eigen::Index>() == p.value.cols(),
            ErrorKind::io_error, path.string() + ": parameter " + p.name + " does not match the index");
    in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * 8));
    require(static_cast<bool>(in), ErrorKind::io_error, path.string() + ": truncated parameter blob");
  }
  return ck;
}

}  // namespace matfun::nn
