#include "matfun/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "matfun/errors.hpp"

namespace matfun::nn {

namespace {

std::string shape(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::dimension_mismatch,
          std::string(op) + ": shapes " + shape(a) + " and " + shape(b) + " differ");
}

Tape& tape_of(Var v) {
  require(v.tape() != nullptr, ErrorKind::invalid_argument, "autodiff: variable is not attached to a tape");
  return *v.tape();
}

void accumulate(Tape& t, int id, const Tensor& g) {
  if (t.needs_grad(id)) t.grad_slot(id) += g;
}

}  // namespace

const Tensor& Var::value() const { return tape_of(*this).value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorKind::dimension_mismatch, "scalar(): value is " + shape(v));
  return v(0, 0);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, false});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back({{}, {}, {}, &p, p.trainable});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward back) {
  bool needs = false;
  for (Var p : parents) {
    require(p.tape() == this, ErrorKind::invalid_argument, "autodiff: mixing variables from different tapes");
    needs = needs || needs_grad(p.id());
  }
  nodes_.push_back({std::move(value), {}, needs ? std::move(back) : Backward{}, nullptr, needs});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad_slot(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad.setZero(n.val().rows(), n.val().cols());
  return n.grad;
}

void Tape::backward(Var root) {
  require(root.tape() == this, ErrorKind::invalid_argument, "backward: root belongs to another tape");
  const Tensor& rv = value(root.id());
  require(rv.rows() == 1 && rv.cols() == 1, ErrorKind::dimension_mismatch, "backward: root must be 1x1, got " + shape(rv));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  grad_slot(root.id()).setOnes();
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, id);
    if (n.param && n.param->trainable) {
      if (n.param->grad.rows() != n.param->value.rows() || n.param->grad.cols() != n.param->value.cols())
        n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), ErrorKind::dimension_mismatch,
          "matmul: " + shape(a.value()) + " times " + shape(b.value()));
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_slot(ia).noalias() += g * t.value(ib).transpose();
    if (t.needs_grad(ib)) t.grad_slot(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var matmul_bt(Var a, Var b) {
  require(a.cols() == b.cols(), ErrorKind::dimension_mismatch,
          "matmul_bt: " + shape(a.value()) + " times transpose of " + shape(b.value()));
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() * b.value().transpose(), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_slot(ia).noalias() += g * t.value(ib);
    if (t.needs_grad(ib)) t.grad_slot(ib).noalias() += g.transpose() * t.value(ia);
  });
}

Var add(Var a, Var b) {
  same_shape(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    accumulate(t, ia, t.grad(self));
    accumulate(t, ib, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  same_shape(a.value(), b.value(), "sub");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    accumulate(t, ia, t.grad(self));
    if (t.needs_grad(ib)) t.grad_slot(ib) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  same_shape(a.value(), b.value(), "mul");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_slot(ia) += g.cwiseProduct(t.value(ib));
    if (t.needs_grad(ib)) t.grad_slot(ib) += g.cwiseProduct(t.value(ia));
  });
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return tape_of(a).record(a.value() * s, {a}, [ia, s](Tape& t, int self) { t.grad_slot(ia) += s * t.grad(self); });
}

Var add_row(Var x, Var row) {
  require(row.rows() == 1 && row.cols() == x.cols(), ErrorKind::dimension_mismatch,
          "add_row: row " + shape(row.value()) + " for " + shape(x.value()));
  const int ix = x.id(), ir = row.id();
  Tensor out = x.value();
  out.rowwise() += row.value().row(0);
  return tape_of(x).record(std::move(out), {x, row}, [ix, ir](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    accumulate(t, ix, g);
    if (t.needs_grad(ir)) t.grad_slot(ir) += g.colwise().sum();
  });
}

Var add_periodic(Var x, Var pos) {
  const Eigen::Index period = pos.rows();
  require(period > 0 && x.rows() % period == 0 && x.cols() == pos.cols(), ErrorKind::dimension_mismatch,
          "add_periodic: " + shape(pos.value()) + " does not tile " + shape(x.value()));
  const int ix = x.id(), ip = pos.id();
  Tensor out = x.value();
  for (Eigen::Index b = 0; b < out.rows(); b += period) out.middleRows(b, period) += pos.value();
  return tape_of(x).record(std::move(out), {x, pos}, [ix, ip, period](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    accumulate(t, ix, g);
    if (t.needs_grad(ip)) {
      Tensor& gp = t.grad_slot(ip);
      for (Eigen::Index b = 0; b < g.rows(); b += period) gp += g.middleRows(b, period);
    }
  });
}

Var relu(Var x) {
  const int ix = x.id();
  return tape_of(x).record(x.value().cwiseMax(0.0), {x}, [ix](Tape& t, int self) {
    t.grad_slot(ix) += (t.value(ix).array() > 0.0).select(t.grad(self), 0.0);
  });
}

Var sin(Var x) {
  const int ix = x.id();
  return tape_of(x).record(x.value().array().sin().matrix(), {x}, [ix](Tape& t, int self) {
    t.grad_slot(ix) += t.grad(self).cwiseProduct(t.value(ix).array().cos().matrix());
  });
}

Var cos(Var x) {
  const int ix = x.id();
  return tape_of(x).record(x.value().array().cos().matrix(), {x}, [ix](Tape& t, int self) {
    t.grad_slot(ix) -= t.grad(self).cwiseProduct(t.value(ix).array().sin().matrix());
  });
}

Var concat_cols(Var a, Var b) {
  require(a.rows() == b.rows(), ErrorKind::dimension_mismatch,
          "concat_cols: " + shape(a.value()) + " and " + shape(b.value()));
  Tensor out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const int ia = a.id(), ib = b.id();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return tape_of(a).record(std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_slot(ia) += g.leftCols(ca);
    if (t.needs_grad(ib)) t.grad_slot(ib) += g.rightCols(cb);
  });
}

Var slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= x.rows(), ErrorKind::dimension_mismatch,
          "slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) + ") of " +
              shape(x.value()));
  const int ix = x.id();
  return tape_of(x).record(x.value().middleRows(start, count), {x}, [ix, start, count](Tape& t, int self) {
    t.grad_slot(ix).middleRows(start, count) += t.grad(self);
  });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == x.value().size(), ErrorKind::dimension_mismatch,
          "reshape: " + shape(x.value()) + " to " + std::to_string(rows) + "x" + std::to_string(cols));
  const int ix = x.id();
  Tensor out = Eigen::Map<const Tensor>(x.value().data(), rows, cols);
  return tape_of(x).record(std::move(out), {x}, [ix](Tape& t, int self) {
    Tensor& gx = t.grad_slot(ix);
    gx += Eigen::Map<const Tensor>(t.grad(self).data(), gx.rows(), gx.cols());
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Eigen::Index c = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == c && beta.rows() == 1 && beta.cols() == c,
          ErrorKind::dimension_mismatch, "layer_norm: gain/bias must be 1x" + std::to_string(c));
  const Tensor& xv = x.value();
  Tensor xhat(xv.rows(), c);
  Eigen::VectorXd inv_sigma(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_sigma(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_sigma(i);
  }
  Tensor out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return tape_of(x).record(std::move(out), {x, gamma, beta},
                           [ix, ig, ib, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Tape& t, int self) {
                             const Tensor& g = t.grad(self);
                             if (t.needs_grad(ig)) t.grad_slot(ig) += g.cwiseProduct(xhat).colwise().sum();
                             if (t.needs_grad(ib)) t.grad_slot(ib) += g.colwise().sum();
                             if (!t.needs_grad(ix)) return;
                             Tensor gh = g;
                             gh.array().rowwise() *= t.value(ig).row(0).array();
                             Tensor& gx = t.grad_slot(ix);
                             for (Eigen::Index i = 0; i < gh.rows(); ++i) {
                               const double m1 = gh.row(i).mean();
                               const double m2 = gh.row(i).dot(xhat.row(i)) / static_cast<double>(gh.cols());
                               gx.row(i).array() +=
                                   inv_sigma(i) * (gh.row(i).array() - m1 - xhat.row(i).array() * m2);
                             }
                           });
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  Tensor out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tv.rows(), ErrorKind::invalid_argument,
            "embedding: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(tv.rows()) + " rows");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  const int it = table.id();
  return tape_of(table).record(std::move(out), {table},
                               [it, idv = std::vector<int>(ids.begin(), ids.end())](Tape& t, int self) {
                                 const Tensor& g = t.grad(self);
                                 Tensor& gt = t.grad_slot(it);
                                 for (std::size_t i = 0; i < idv.size(); ++i) gt.row(idv[i]) += g.row(static_cast<Eigen::Index>(i));
                               });
}

Var dropout(Var x, double p, CounterRng* rng) {
  require(p >= 0.0 && p < 1.0, ErrorKind::invalid_argument, "dropout: rate must lie in [0, 1)");
  if (rng == nullptr || p == 0.0) return x;
  Tensor mask(x.rows(), x.cols());
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = rng->uniform() < p ? 0.0 : keep;
  const int ix = x.id();
  Tensor out = x.value().cwiseProduct(mask);
  return tape_of(x).record(std::move(out), {x}, [ix, mask = std::move(mask)](Tape& t, int self) {
    t.grad_slot(ix) += t.grad(self).cwiseProduct(mask);
  });
}

Var sum(Var x) {
  const int ix = x.id();
  Tensor out(1, 1);
  out(0, 0) = x.value().sum();
  return tape_of(x).record(std::move(out), {x}, [ix](Tape& t, int self) {
    t.grad_slot(ix).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var x) {
  require(x.value().size() > 0, ErrorKind::invalid_argument, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

namespace {

struct AttnDims {
  Eigen::Index lq, lk, dh;
};

AttnDims check_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionShape& s) {
  require(s.batch > 0 && s.heads > 0, ErrorKind::invalid_argument, "attention: batch and heads must be positive");
  require(q.cols() == k.cols() && k.cols() == v.cols() && k.rows() == v.rows(), ErrorKind::dimension_mismatch,
          "attention: q " + shape(q) + ", k " + shape(k) + ", v " + shape(v));
  require(q.rows() % s.batch == 0 && k.rows() % s.batch == 0, ErrorKind::dimension_mismatch,
          "attention: rows not divisible by batch " + std::to_string(s.batch));
  require(q.cols() % s.heads == 0, ErrorKind::dimension_mismatch,
          "attention: width " + std::to_string(q.cols()) + " not divisible by " + std::to_string(s.heads) + " heads");
  AttnDims d{q.rows() / s.batch, k.rows() / s.batch, q.cols() / s.heads};
  require(d.dh > 0, ErrorKind::invalid_argument, "attention: d_k must be positive");
  require(!s.causal || d.lq == d.lk, ErrorKind::dimension_mismatch, "attention: causal mask needs Lq == Lk");
  return d;
}

Tensor softmax_scores(const Tensor& q, const Tensor& k, const AttentionShape& s, const AttnDims& d, Eigen::Index b,
                      Eigen::Index h) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.dh));
  Tensor p = q.block(b * d.lq, h * d.dh, d.lq, d.dh) * k.block(b * d.lk, h * d.dh, d.lk, d.dh).transpose() * scale;
  for (Eigen::Index i = 0; i < d.lq; ++i) {
    const Eigen::Index visible = s.causal ? i + 1 : d.lk;
    const double mx = p.row(i).head(visible).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < d.lk; ++j) {
      const double e = j < visible ? std::exp(p(i, j) - mx) : 0.0;
      p(i, j) = e;
      z += e;
    }
    p.row(i) /= z;
  }
  return p;
}

}  // namespace

std::vector<Tensor> attention_weights(const Tensor& q, const Tensor& k, const AttentionShape& s) {
  const AttnDims d = check_attention(q, k, k, s);
  std::vector<Tensor> out;
  for (Eigen::Index b = 0; b < s.batch; ++b)
    for (Eigen::Index h = 0; h < s.heads; ++h) out.push_back(softmax_scores(q, k, s, d, b, h));
  return out;
}

Var attention(Var q, Var k, Var v, const AttentionShape& s) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const AttnDims d = check_attention(qv, kv, vv, s);
  std::vector<Tensor> probs;
  probs.reserve(static_cast<std::size_t>(s.batch * s.heads));
  Tensor out(qv.rows(), qv.cols());
  for (Eigen::Index b = 0; b < s.batch; ++b) {
    for (Eigen::Index h = 0; h < s.heads; ++h) {
      probs.push_back(softmax_scores(qv, kv, s, d, b, h));
      out.block(b * d.lq, h * d.dh, d.lq, d.dh).noalias() = probs.back() * vv.block(b * d.lk, h * d.dh, d.lk, d.dh);
    }
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return tape_of(q).record(
      std::move(out), {q, k, v}, [iq, ik, iv, s, d, probs = std::move(probs)](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(iq);
        const Tensor& kv = t.value(ik);
        const Tensor& vv = t.value(iv);
        const bool gq = t.needs_grad(iq), gk = t.needs_grad(ik), gv = t.needs_grad(iv);
        const double scale = 1.0 / std::sqrt(static_cast<double>(d.dh));
        for (Eigen::Index b = 0; b < s.batch; ++b) {
          for (Eigen::Index h = 0; h < s.heads; ++h) {
            const Tensor& p = probs[static_cast<std::size_t>(b * s.heads + h)];
            const auto go = g.block(b * d.lq, h * d.dh, d.lq, d.dh);
            if (gv) t.grad_slot(iv).block(b * d.lk, h * d.dh, d.lk, d.dh).noalias() += p.transpose() * go;
            if (!gq && !gk) continue;
            Tensor dp = go * vv.block(b * d.lk, h * d.dh, d.lk, d.dh).transpose();
            Tensor ds = p.cwiseProduct(dp);
            const Eigen::VectorXd rs = ds.rowwise().sum();
            ds -= (p.array().colwise() * rs.array()).matrix();
            ds *= scale;
            if (gq) t.grad_slot(iq).block(b * d.lq, h * d.dh, d.lq, d.dh).noalias() +=
                ds * kv.block(b * d.lk, h * d.dh, d.lk, d.dh);
            if (gk) t.grad_slot(ik).block(b * d.lk, h * d.dh, d.lk, d.dh).noalias() +=
                ds.transpose() * qv.block(b * d.lq, h * d.dh, d.lq, d.dh);
          }
        }
      });
}

Var rel_l1_loss(Var pred, const Tensor& target, double eps) {
  same_shape(pred.value(), target, "rel_l1_loss");
  require(target.rows() > 0, ErrorKind::invalid_argument, "rel_l1_loss: empty batch");
  const Tensor diff = pred.value() - target;
  const Eigen::VectorXd den = (target.cwiseAbs().rowwise().sum().array() + eps).matrix();
  Tensor out(1, 1);
  out(0, 0) = (diff.cwiseAbs().rowwise().sum().array() / den.array()).mean();
  const int ip = pred.id();
  const auto rows = static_cast<double>(target.rows());
  return tape_of(pred).record(std::move(out), {pred}, [ip, diff, den, rows](Tape& t, int self) {
    Tensor g = diff.array().sign().matrix();
    g.array().colwise() /= den.array() * rows;
    t.grad_slot(ip) += t.grad(self)(0, 0) * g;
  });
}

Var frobenius_loss(Var pred, const Tensor& target) {
  same_shape(pred.value(), target, "frobenius_loss");
  require(target.rows() > 0, ErrorKind::invalid_argument, "frobenius_loss: empty batch");
  const Tensor diff = pred.value() - target;
  const Eigen::VectorXd norms = diff.rowwise().norm();
  Tensor out(1, 1);
  out(0, 0) = norms.mean();
  const int ip = pred.id();
  const auto rows = static_cast<double>(target.rows());
  return tape_of(pred).record(std::move(out), {pred}, [ip, diff, norms, rows](Tape& t, int self) {
    Tensor g = diff;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (norms(i) > 0.0)
        g.row(i) /= norms(i) * rows;
      else
        g.row(i).setZero();
    }
    t.grad_slot(ip) += t.grad(self)(0, 0) * g;
  });
}

Var mse_loss(Var pred, const Tensor& target) {
  same_shape(pred.value(), target, "mse_loss");
  require(target.size() > 0, ErrorKind::invalid_argument, "mse_loss: empty batch");
  const Tensor diff = pred.value() - target;
  Tensor out(1, 1);
  out(0, 0) = diff.squaredNorm() / static_cast<double>(diff.size());
  const int ip = pred.id();
  return tape_of(pred).record(std::move(out), {pred}, [ip, diff](Tape& t, int self) {
    t.grad_slot(ip) += (2.0 * t.grad(self)(0, 0) / static_cast<double>(diff.size())) * diff;
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& lv = logits.value();
  require(static_cast<Eigen::Index>(labels.size()) == lv.rows(), ErrorKind::dimension_mismatch,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " + shape(lv) + " logits");
  Tensor probs(lv.rows(), lv.cols());
  double total = 0.0;
  std::size_t counted = 0;
  for (Eigen::Index i = 0; i < lv.rows(); ++i) {
    const double mx = lv.row(i).maxCoeff();
    probs.row(i) = (lv.row(i).array() - mx).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0) continue;
    require(y < lv.cols(), ErrorKind::invalid_argument, "cross_entropy: label " + std::to_string(y) + " out of range");
    total += std::log(z) + mx - lv(i, y);
    ++counted;
  }
  require(counted > 0, ErrorKind::invalid_argument, "cross_entropy: no labelled rows");
  Tensor out(1, 1);
  out(0, 0) = total / static_cast<double>(counted);
  const int il = logits.id();
  return tape_of(logits).record(
      std::move(out), {logits},
      [il, probs = std::move(probs), lab = std::vector<int>(labels.begin(), labels.end()), counted](Tape& t, int self) {
        const double s = t.grad(self)(0, 0) / static_cast<double>(counted);
        Tensor& gl = t.grad_slot(il);
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
          const int y = lab[static_cast<std::size_t>(i)];
          if (y < 0) continue;
          gl.row(i) += s * probs.row(i);
          gl(i, y) -= s;
        }
      });
}

GradCheckResult gradient_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params, double h,
                               std::size_t max_entries) {
  for (Parameter* p : params) p->zero_grad();
  double l0 = 0.0;
  {
    Tape tape;
    const Var l = loss(tape);
    l0 = l.scalar();
    tape.backward(l);
  }
  auto eval = [&] {
    Tape tape;
    return loss(tape).scalar();
  };
  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const auto total = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_entries > 0 && total > max_entries) {
      CounterRng rng(0, "gradcheck", pi);
      for (std::size_t i = 0; i < max_entries; ++i) std::swap(coords[i], coords[i + rng.below(total - i)]);
      coords.resize(max_entries);
    }
    double num = 0.0, an = 0.0, fd = 0.0;
    for (std::size_t c : coords) {
      double& x = p.value.data()[c];
      const double x0 = x;
      x = x0 + h;
      const double up = eval();
      x = x0 - h;
      const double down = eval();
      x = x0;
      const double g_fd = (up - down) / (2.0 * h);
      const double g = p.grad.data()[c];
      num += (g - g_fd) * (g - g_fd);
      an += g * g;
      fd += g_fd * g_fd;
    }
    res.coordinates += coords.size();
    // Parameters with an identically zero gradient (a key bias under softmax)
    // would divide difference noise by ~0; below the floor the check is absolute.
    // Difference roundoff grows with |loss|, so the floor does too.
    const double floor = 1e-5 * std::max(1.0, std::abs(l0));
    const double rel = std::sqrt(num) / std::max({std::sqrt(an), std::sqrt(fd), floor});
    if (res.worst.empty() || rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst = p.name;
    }
  }
  return res;
}

}  // namespace matfun::nn
