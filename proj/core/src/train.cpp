#include "matfun/train.hpp"

#include <algorithm>
#include <cmath>

#include "matfun/errors.hpp"
#include "matfun/parallel.hpp"

namespace matfun::nn {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::rel_l1: return "rel_l1";
    case LossKind::frobenius: return "frobenius";
    case LossKind::mse: return "mse";
    case LossKind::cross_entropy: return "cross_entropy";
  }
  return "?";
}

LossKind parse_loss(const std::string& name) {
  if (name == "rel_l1") return LossKind::rel_l1;
  if (name == "frobenius") return LossKind::frobenius;
  if (name == "mse") return LossKind::mse;
  if (name == "cross_entropy") return LossKind::cross_entropy;
  fail(ErrorKind::invalid_argument, "unknown loss '" + name + "' (rel_l1, frobenius, mse, cross_entropy)");
}

LossKind regression_loss_for(MatrixFunction f, std::size_t n) {
  if (f == MatrixFunction::exp) return LossKind::rel_l1;
  return n == 1 ? LossKind::mse : LossKind::frobenius;
}

Var regression_loss(LossKind kind, Var pred, const Tensor& target, double eps) {
  switch (kind) {
    case LossKind::rel_l1: return rel_l1_loss(pred, target, eps);
    case LossKind::frobenius: return frobenius_loss(pred, target);
    case LossKind::mse: return mse_loss(pred, target);
    case LossKind::cross_entropy: break;
  }
  fail(ErrorKind::invalid_argument, "regression_loss: " + to_string(kind) + " needs token labels");
}

double Schedule::rate(std::size_t step) const {
  if (warmup == 0) return peak;
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(warmup);
  return s <= w ? peak * s / w : peak * std::sqrt(w / s);
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg, Schedule schedule)
    : params_(std::move(params)), cfg_(cfg), schedule_(schedule) {
  require(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0 && cfg_.eps > 0.0,
          ErrorKind::invalid_argument, "adam: need beta1, beta2 in [0, 1) and eps > 0");
  require(schedule_.peak >= 0.0, ErrorKind::invalid_argument, "adam: learning rate must be non-negative");
  for (Parameter* p : params_) {
    m_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++step_;
  last_rate_ = schedule_.rate(step_);
  double scale_grad = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (Parameter* p : params_) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) scale_grad = cfg_.clip_norm / norm;
  }
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    require(p.grad.rows() == p.value.rows() && p.grad.cols() == p.value.cols(), ErrorKind::dimension_mismatch,
            "adam: gradient of " + p.name + " has the wrong shape");
    const Tensor g = scale_grad * p.grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    if (last_rate_ == 0.0) continue;
    p.value.array() -= last_rate_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch},
          {"steps", steps},
          {"train_loss", train_loss},
          {"rate", rate},
          {"heldout_accuracy", heldout_accuracy},
          {"heldout_malformed", heldout_malformed}};
}

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (const EpochRecord& e : epochs) ep.push_back(e.to_json());
  return {{"loss", to_string(loss)},
          {"train_count", train_count},
          {"holdout_count", holdout_count},
          {"taus", taus},
          {"epochs", ep}};
}

void shuffle(std::vector<std::size_t>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

Split split_indices(std::size_t count, double holdout, std::uint64_t seed) {
  require(holdout >= 0.0 && holdout < 1.0, ErrorKind::invalid_argument, "holdout fraction must lie in [0, 1)");
  std::vector<std::size_t> all(count);
  for (std::size_t i = 0; i < count; ++i) all[i] = i;
  CounterRng rng(seed, "split", 0);
  shuffle(all, rng);
  auto h = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(count)));
  if (holdout > 0.0 && count > 1) h = std::clamp<std::size_t>(h, 1, count - 1);
  Split s;
  s.train.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(h));
  s.holdout.assign(all.end() - static_cast<std::ptrdiff_t>(h), all.end());
  return s;
}

namespace {

Tensor stack(std::span<const data::Sample> samples, std::span<const std::size_t> idx, bool target) {
  require(!idx.empty(), ErrorKind::invalid_argument, "empty batch");
  const std::size_t nn = samples[idx[0]].input.size();
  Tensor out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(nn));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Matrix& m = target ? samples[idx[r]].target : samples[idx[r]].input;
    require(m.size() == nn, ErrorKind::dimension_mismatch, "samples in a batch must share one dimension");
    std::copy(m.data().begin(), m.data().end(), out.row(static_cast<Eigen::Index>(r)).data());
  }
  return out;
}

// Shared epoch loop: step_loss builds the batch loss on a tape, score rates
// held-out samples.
template <class StepLoss, class Score>
TrainHistory run_epochs(ParameterSet& params, std::size_t count, const TrainConfig& cfg, LossKind loss,
                        StepLoss&& step_loss, Score&& score) {
  require(count > 0, ErrorKind::invalid_argument, "train: dataset is empty");
  require(cfg.batch > 0 && cfg.epochs > 0, ErrorKind::invalid_argument, "train: batch and epochs must be positive");
  require(!cfg.taus.empty(), ErrorKind::invalid_argument, "train: at least one tolerance is needed");
  const Split split = split_indices(count, cfg.holdout, cfg.seed);
  require(!split.train.empty(), ErrorKind::invalid_argument, "train: no training samples after the holdout split");
  std::vector<std::size_t> scored = split.holdout;
  if (cfg.eval_limit > 0 && scored.size() > cfg.eval_limit) scored.resize(cfg.eval_limit);

  TrainHistory hist;
  hist.loss = loss;
  hist.train_count = split.train.size();
  hist.holdout_count = split.holdout.size();
  hist.taus = cfg.taus;

  Adam adam(params.trainable(), cfg.adam, cfg.schedule);
  std::vector<std::size_t> order = split.train;
  bool stop = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    CounterRng shuffler(cfg.seed, "shuffle", epoch);
    shuffle(order, shuffler);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::span<const std::size_t> idx(order.data() + b, std::min(cfg.batch, order.size() - b));
      CounterRng drop(cfg.seed, "dropout", adam.steps());
      params.zero_grad();
      Tape tape;
      const Var l = step_loss(tape, idx, ForwardMode{true, &drop});
      const double lv = l.scalar();
      if (!std::isfinite(lv)) {
        fail(ErrorKind::divergence, "training diverged: loss " + std::to_string(lv) + " at step " +
                                        std::to_string(adam.steps() + 1) + " (epoch " + std::to_string(epoch) + ")");
      }
      tape.backward(l);
      adam.step();
      total += lv;
      ++batches;
      if (cfg.max_steps > 0 && adam.steps() >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = adam.steps();
    rec.train_loss = total / static_cast<double>(batches);
    rec.rate = adam.last_rate();
    if (!scored.empty()) {
      const metrics::EvalErrors e = score(std::span<const std::size_t>(scored));
      for (double tau : cfg.taus) rec.heldout_accuracy.push_back(e.accuracy(tau));
      rec.heldout_malformed = e.malformed;
      if (cfg.stop_accuracy > 0.0 && rec.heldout_accuracy.front() >= cfg.stop_accuracy) stop = true;
    }
    hist.epochs.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);
    if (cfg.stop_when && cfg.stop_when(rec)) stop = true;
  }
  return hist;
}

}  // namespace

Tensor stack_inputs(std::span<const data::Sample> samples, std::span<const std::size_t> idx) {
  return stack(samples, idx, false);
}

Tensor stack_targets(std::span<const data::Sample> samples, std::span<const std::size_t> idx) {
  return stack(samples, idx, true);
}

metrics::EvalErrors evaluate_regression(RegressionModel& model, std::span<const data::Sample> samples,
                                        std::span<const std::size_t> idx, double eps) {
  metrics::EvalErrors out;
  out.arch_or_scheme = model.arch();
  out.n = model.n();
  if (idx.empty()) return out;
  out.function = std::string(matfun::to_string(samples[idx[0]].function));
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (idx.size() + kChunk - 1) / kChunk;
  std::vector<Tensor> preds(chunks);
  parallel_chunks(idx.size(), chunks, [&](std::size_t begin, std::size_t end, std::size_t c) {
    preds[c] = model.predict(stack_inputs(samples, idx.subspan(begin, end - begin)));
  });
  std::size_t row = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    for (Eigen::Index r = 0; r < preds[c].rows(); ++r, ++row) {
      const Matrix& y = samples[idx[row]].target;
      Matrix p(y.n());
      std::copy(preds[c].row(r).data(), preds[c].row(r).data() + preds[c].cols(), p.data().begin());
      out.add(p.all_finite() ? std::optional<Matrix>(std::move(p)) : std::nullopt, y, eps);
    }
  }
  return out;
}

TrainHistory train_regression(RegressionModel& model, std::span<const data::Sample> samples, LossKind loss,
                              const TrainConfig& cfg) {
  require(loss != LossKind::cross_entropy, ErrorKind::invalid_argument, "train_regression: cross-entropy needs tokens");
  return run_epochs(
      model.params(), samples.size(), cfg, loss,
      [&](Tape& t, std::span<const std::size_t> idx, const ForwardMode& mode) {
        const Var pred = model.forward(t, stack_inputs(samples, idx), mode);
        return regression_loss(loss, pred, stack_targets(samples, idx), cfg.eps);
      },
      [&](std::span<const std::size_t> idx) { return evaluate_regression(model, samples, idx, cfg.eps); });
}

SeqPair tokenize(const data::Sample& s, codec::Scheme scheme) {
  return {codec::encode_matrix(s.input, scheme), codec::encode_matrix(s.target, scheme)};
}

TokenSeq shift_right(const TokenSeq& tgt, codec::Scheme scheme) {
  TokenSeq in;
  in.reserve(tgt.size());
  in.push_back(codec::vocab(scheme).bos());
  if (!tgt.empty()) in.insert(in.end(), tgt.begin(), tgt.end() - 1);
  return in;
}

TrainHistory train_seq2seq(EncoderDecoder& model, std::span<const data::Sample> samples, const TrainConfig& cfg) {
  const codec::Scheme scheme = model.cfg().scheme;
  std::vector<SeqPair> pairs;
  pairs.reserve(samples.size());
  for (const data::Sample& s : samples) pairs.push_back(tokenize(s, scheme));
  return run_epochs(
      model.params(), samples.size(), cfg, LossKind::cross_entropy,
      [&](Tape& t, std::span<const std::size_t> idx, const ForwardMode& mode) {
        std::vector<TokenSeq> src, tgt_in;
        std::vector<int> labels;
        for (std::size_t i : idx) {
          src.push_back(pairs[i].src);
          tgt_in.push_back(shift_right(pairs[i].tgt, scheme));
          labels.insert(labels.end(), pairs[i].tgt.begin(), pairs[i].tgt.end());
        }
        return cross_entropy(model.forward(t, src, tgt_in, mode), labels);
      },
      [&](std::span<const std::size_t> idx) { return evaluate_seq2seq(model, samples, idx).errors; });
}

std::vector<Decoded> greedy_decode(EncoderDecoder& model, const std::vector<TokenSeq>& src, std::size_t max_new,
                                   std::optional<std::size_t> n) {
  const codec::Scheme scheme = model.cfg().scheme;
  const codec::Vocabulary& v = codec::vocab(scheme);
  require(max_new > 0 && max_new <= model.cfg().max_len, ErrorKind::invalid_argument,
          "greedy_decode: length cap must lie in [1, " + std::to_string(model.cfg().max_len) + "]");
  const std::size_t batch = src.size();
  std::vector<Decoded> out(batch);
  if (batch == 0) return out;
  Tensor memory;
  {
    Tape t;
    memory = model.encode(t, src, {}).value();
  }
  std::vector<bool> done(batch, false);
  std::size_t open = batch;
  for (std::size_t step = 0; step < max_new && open > 0; ++step) {
    std::vector<TokenSeq> tgt_in(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      tgt_in[b].push_back(v.bos());
      tgt_in[b].insert(tgt_in[b].end(), out[b].tokens.begin(), out[b].tokens.end());
      tgt_in[b].resize(step + 1, v.pad());
    }
    Tape t;
    const Tensor& logits = model.decode(t, t.constant(memory), batch, tgt_in, {}).value();
    for (std::size_t b = 0; b < batch; ++b) {
      if (done[b]) continue;
      Eigen::Index best = 0;
      logits.row(static_cast<Eigen::Index>(b * (step + 1) + step)).maxCoeff(&best);
      const auto tok = static_cast<codec::TokenId>(best);
      out[b].tokens.push_back(tok);
      if (tok == v.eos()) {
        done[b] = true;
        --open;
      }
    }
  }
  for (std::size_t b = 0; b < batch; ++b) {
    if (!done[b]) {
      out[b].error = "no <EOS> within " + std::to_string(max_new) + " tokens";
      continue;
    }
    try {
      out[b].matrix = codec::decode_matrix(out[b].tokens, scheme, n);
    } catch (const Error& e) {
      out[b].error = e.what();
    }
  }
  return out;
}

Seq2SeqEval evaluate_seq2seq(EncoderDecoder& model, std::span<const data::Sample> samples,
                             std::span<const std::size_t> idx, std::size_t batch, double eps) {
  require(batch > 0, ErrorKind::invalid_argument, "evaluate_seq2seq: batch must be positive");
  const codec::Scheme scheme = model.cfg().scheme;
  Seq2SeqEval res;
  res.errors.arch_or_scheme = std::string(codec::to_string(scheme));
  if (idx.empty()) return res;
  const std::size_t n = samples[idx[0]].input.n();
  res.errors.n = n;
  res.errors.function = std::string(matfun::to_string(samples[idx[0]].function));
  const std::size_t cap = std::min(codec::sequence_length(n, scheme) + 2, model.cfg().max_len);
  const std::size_t chunks = (idx.size() + batch - 1) / batch;
  std::vector<std::vector<Decoded>> decoded(chunks);
  parallel_chunks(idx.size(), chunks, [&](std::size_t begin, std::size_t end, std::size_t c) {
    std::vector<TokenSeq> src;
    for (std::size_t i = begin; i < end; ++i) src.push_back(codec::encode_matrix(samples[idx[i]].input, scheme));
    decoded[c] = greedy_decode(model, src, cap, n);
  });
  std::size_t i = 0;
  for (const auto& chunk : decoded) {
    for (const Decoded& d : chunk) {
      const data::Sample& s = samples[idx[i++]];
      if (d.tokens == codec::encode_matrix(s.target, scheme)) ++res.exact;
      res.errors.add(d.matrix, s.target, eps);
    }
  }
  return res;
}

Preset make_preset(const std::string& preset, const std::string& arch, std::size_t n, codec::Scheme scheme,
                   std::uint64_t seed) {
  require(preset == "desk" || preset == "paper", ErrorKind::invalid_argument,
          "unknown preset '" + preset + "' (desk, paper)");
  require(n >= 1 && n <= codec::kMaxDim, ErrorKind::invalid_argument, "preset: n must be in [1, 10]");
  const bool paper = preset == "paper";
  Preset p{preset, arch, 0, 0, 0, {}, {}};
  if (arch == "mlp3" || arch == "mlp7") {
    p.epochs = paper ? 100 : 20;
    p.batch = 128;
    p.samples = paper ? 300000 : 10000;
    p.schedule = {1e-3, 0};
    p.model = {{"arch", arch}, {"n", n}, {"seed", seed}};
  } else if (arch == "fourier-enc") {
    p.epochs = paper ? 600 : 20;
    p.batch = 64;
    p.samples = paper ? 300000 : 10000;
    p.schedule = {1e-3, 0};
    p.model = {{"arch", arch}, {"n", n}, {"seed", seed}};
  } else if (arch == "encdec") {
    const TransformerConfig tc = paper ? TransformerConfig::paper(scheme) : TransformerConfig::desk(scheme);
    p.epochs = paper ? 100 : 10;
    p.batch = 64;
    p.samples = paper ? 300000 : 10000;
    p.schedule = paper ? Schedule{1e-4, 10000} : Schedule{1e-3, 500};
    p.model = {{"arch", arch},           {"enc_layers", tc.enc_layers}, {"dec_layers", tc.dec_layers},
               {"heads", tc.heads},      {"dim", tc.dim},               {"ff_dim", tc.ff_dim},
               {"max_len", tc.max_len},  {"dropout", tc.dropout},       {"scheme", codec::to_string(scheme)},
               {"seed", seed}};
  } else {
    fail(ErrorKind::invalid_argument, "unknown architecture '" + arch + "' (mlp3, mlp7, fourier-enc, encdec)");
  }
  return p;
}

}  // namespace matfun::nn
