#include "neurotok/autodiff.hpp"

#include <cmath>

namespace neurotok {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) raise(Err::ShapeMismatch, "vars belong to different tapes");
}

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    raise(Err::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                  std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                  "x" + std::to_string(b.cols()));
}

}  // namespace

Var Tape::leaf(Mat value) { return record(std::move(value), true, nullptr); }

Var Tape::constant(Mat value) { return record(std::move(value), false, nullptr); }

Var Tape::record(Mat value, bool requires_grad, BackFn back) {
  Node node;
  node.value = std::move(value);
  node.back = std::move(back);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= size())
    raise(Err::IndexOutOfRange, "bad var id " + std::to_string(v.id));
  return nodes_[v.id].value;
}

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

Mat& Tape::grad_buffer(int id) {
  Node& node = nodes_.at(id);
  if (node.grad.size() == 0) node.grad = Mat::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

const Mat& Tape::grad(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= size())
    raise(Err::IndexOutOfRange, "bad var id " + std::to_string(v.id));
  return const_cast<Tape*>(this)->grad_buffer(v.id);
}

void Tape::backward(Var scalar_loss) {
  const Mat& lv = value(scalar_loss);
  if (lv.rows() != 1 || lv.cols() != 1)
    raise(Err::NonScalarOutput, "backward needs a 1x1 loss node");
  grad_buffer(scalar_loss.id)(0, 0) = 1.0;
  for (int id = scalar_loss.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.back && node.grad.size() != 0) node.back(*this, node.grad);
  }
}

// --- ops ---

Var add(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "add");
  bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  int aid = a.id, bid = b.id;
  return t.record(t.value(a) + t.value(b), ga || gb, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid) += g;
    if (gb) tp.grad_buffer(bid) += g;
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "sub");
  bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  int aid = a.id, bid = b.id;
  return t.record(t.value(a) - t.value(b), ga || gb, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid) += g;
    if (gb) tp.grad_buffer(bid) -= g;
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "mul");
  bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  int aid = a.id, bid = b.id;
  return t.record(t.value(a).cwiseProduct(t.value(b)), ga || gb,
                  [=](Tape& tp, const Mat& g) {
                    if (ga) tp.grad_buffer(aid) += g.cwiseProduct(tp.value(Var{&tp, bid}));
                    if (gb) tp.grad_buffer(bid) += g.cwiseProduct(tp.value(Var{&tp, aid}));
                  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  bool ga = t.requires_grad(a);
  int aid = a.id;
  return t.record(t.value(a) * s, ga, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid) += g * s;
  });
}

Var add_rowvec(Var a, Var row) {
  check_same_tape(a, row);
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols())
    raise(Err::ShapeMismatch, "add_rowvec: row must be 1x" + std::to_string(av.cols()));
  bool ga = t.requires_grad(a), gr = t.requires_grad(row);
  int aid = a.id, rid = row.id;
  Mat out = av.rowwise() + rv.row(0);
  return t.record(std::move(out), ga || gr, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid) += g;
    if (gr) tp.grad_buffer(rid) += g.colwise().sum();
  });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.cols() != bv.rows())
    raise(Err::ShapeMismatch, "matmul: " + std::to_string(av.rows()) + "x" +
                                  std::to_string(av.cols()) + " times " +
                                  std::to_string(bv.rows()) + "x" + std::to_string(bv.cols()));
  bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  int aid = a.id, bid = b.id;
  return t.record(av * bv, ga || gb, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid).noalias() += g * tp.value(Var{&tp, bid}).transpose();
    if (gb) tp.grad_buffer(bid).noalias() += tp.value(Var{&tp, aid}).transpose() * g;
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  bool ga = t.requires_grad(a);
  int aid = a.id;
  return t.record(t.value(a).transpose(), ga, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid) += g.transpose();
  });
}

Var slice_rows(Var a, int first, int count) {
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  if (first < 0 || count < 0 || first + count > av.rows())
    raise(Err::IndexOutOfRange, "slice_rows out of range");
  bool ga = t.requires_grad(a);
  int aid = a.id;
  return t.record(av.middleRows(first, count), ga, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid).middleRows(first, count) += g;
  });
}

Var slice_cols(Var a, int first, int count) {
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  if (first < 0 || count < 0 || first + count > av.cols())
    raise(Err::IndexOutOfRange, "slice_cols out of range");
  bool ga = t.requires_grad(a);
  int aid = a.id;
  return t.record(av.middleCols(first, count), ga, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid).middleCols(first, count) += g;
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) raise(Err::ShapeMismatch, "concat_rows of nothing");
  Tape& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.value(parts[0]).cols();
  bool rg = false;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    if (t.value(p).cols() != cols) raise(Err::ShapeMismatch, "concat_rows: column mismatch");
    rows += t.value(p).rows();
    rg = rg || t.requires_grad(p);
  }
  Mat out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, t.value(p).rows()) = t.value(p);
    ids.push_back(p.id);
    offsets.push_back(at);
    at += t.value(p).rows();
  }
  return t.record(std::move(out), rg, [ids, offsets](Tape& tp, const Mat& g) {
    for (size_t i = 0; i < ids.size(); ++i) {
      if (!tp.requires_grad(Var{&tp, ids[i]})) continue;
      Eigen::Index n = tp.value(Var{&tp, ids[i]}).rows();
      tp.grad_buffer(ids[i]) += g.middleRows(offsets[i], n);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) raise(Err::ShapeMismatch, "concat_cols of nothing");
  Tape& t = *parts[0].tape;
  Eigen::Index cols = 0;
  const Eigen::Index rows = t.value(parts[0]).rows();
  bool rg = false;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    if (t.value(p).rows() != rows) raise(Err::ShapeMismatch, "concat_cols: row mismatch");
    cols += t.value(p).cols();
    rg = rg || t.requires_grad(p);
  }
  Mat out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, t.value(p).cols()) = t.value(p);
    ids.push_back(p.id);
    offsets.push_back(at);
    at += t.value(p).cols();
  }
  return t.record(std::move(out), rg, [ids, offsets](Tape& tp, const Mat& g) {
    for (size_t i = 0; i < ids.size(); ++i) {
      if (!tp.requires_grad(Var{&tp, ids[i]})) continue;
      Eigen::Index n = tp.value(Var{&tp, ids[i]}).cols();
      tp.grad_buffer(ids[i]) += g.middleCols(offsets[i], n);
    }
  });
}

Var gather_rows(Var a, const std::vector<int>& indices) {
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  for (int i : indices)
    if (i < 0 || i >= av.rows()) raise(Err::IndexOutOfRange, "gather_rows index " + std::to_string(i));
  Mat out(static_cast<Eigen::Index>(indices.size()), av.cols());
  for (size_t r = 0; r < indices.size(); ++r) out.row(r) = av.row(indices[r]);
  bool ga = t.requires_grad(a);
  int aid = a.id;
  return t.record(std::move(out), ga, [aid, ga, indices](Tape& tp, const Mat& g) {
    if (!ga) return;
    Mat& buf = tp.grad_buffer(aid);
    for (size_t r = 0; r < indices.size(); ++r) buf.row(indices[r]) += g.row(r);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  bool ga = t.requires_grad(a);
  int aid = a.id;
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), ga, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid).array() += g(0, 0);
  });
}

Var mean(Var a) {
  Tape& t = *a.tape;
  bool ga = t.requires_grad(a);
  int aid = a.id;
  const double n = static_cast<double>(t.value(a).size());
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum() / n;
  return t.record(std::move(out), ga, [=](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid).array() += g(0, 0) / n;
  });
}

Var gelu(Var a) {
  Tape& t = *a.tape;
  const Mat& av = t.value(a);
  Mat out(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    double x = av(i);
    out(i) = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  bool ga = t.requires_grad(a);
  int aid = a.id;
  return t.record(std::move(out), ga, [=](Tape& tp, const Mat& g) {
    if (!ga) return;
    const Mat& x = tp.value(Var{&tp, aid});
    Mat& buf = tp.grad_buffer(aid);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double v = x(i);
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      buf(i) += g(i) * (cdf + v * pdf);
    }
  });
}

Var tanh_op(Var a) {
  Tape& t = *a.tape;
  Mat out = t.value(a).array().tanh();
  bool ga = t.requires_grad(a);
  int aid = a.id;
  Mat saved = out;
  return t.record(std::move(out), ga, [aid, ga, saved](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid).array() += g.array() * (1.0 - saved.array().square());
  });
}

Var cos_op(Var a) {
  Tape& t = *a.tape;
  Mat out = t.value(a).array().cos();
  bool ga = t.requires_grad(a);
  int aid = a.id;
  return t.record(std::move(out), ga, [aid, ga](Tape& tp, const Mat& g) {
    if (ga) tp.grad_buffer(aid).array() -= g.array() * tp.value(Var{&tp, aid}).array().sin();
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  check_same_tape(x, gain);
  check_same_tape(x, bias);
  Tape& t = *x.tape;
  const Mat& xv = t.value(x);
  const Mat& gv = t.value(gain);
  const Mat& bv = t.value(bias);
  if (gv.rows() != 1 || gv.cols() != xv.cols() || bv.rows() != 1 || bv.cols() != xv.cols())
    raise(Err::ShapeMismatch, "layer_norm: gain/bias must be 1x" + std::to_string(xv.cols()));

  const Eigen::Index rows = xv.rows(), cols = xv.cols();
  Mat xhat(rows, cols);
  Vecd inv_sigma(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mu = xv.row(r).mean();
    double var = (xv.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    xhat.row(r) = (xv.row(r).array() - mu) * is;
  }
  Mat out = (xhat.array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();

  bool gx = t.requires_grad(x), gg = t.requires_grad(gain), gb = t.requires_grad(bias);
  int xid = x.id, gid = gain.id, bid = bias.id;
  return t.record(std::move(out), gx || gg || gb,
                  [=](Tape& tp, const Mat& g) {
                    if (gb) tp.grad_buffer(bid) += g.colwise().sum();
                    if (gg) tp.grad_buffer(gid) += (g.array() * xhat.array()).colwise().sum().matrix();
                    if (!gx) return;
                    const Mat& gainv = tp.value(Var{&tp, gid});
                    Mat& buf = tp.grad_buffer(xid);
                    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                      Eigen::RowVectorXd dxhat =
                          g.row(r).array() * gainv.row(0).array();
                      double m1 = dxhat.mean();
                      double m2 = (dxhat.array() * xhat.row(r).array()).mean();
                      buf.row(r).array() +=
                          inv_sigma[r] * (dxhat.array() - m1 - xhat.row(r).array() * m2);
                    }
                  });
}

Var softmax_rows(Var x) {
  Tape& t = *x.tape;
  const Mat& xv = t.value(x);
  Mat out(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double mx = xv.row(r).maxCoeff();
    Eigen::RowVectorXd e = (xv.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  bool gx = t.requires_grad(x);
  int xid = x.id;
  Mat saved = out;
  return t.record(std::move(out), gx, [xid, gx, saved](Tape& tp, const Mat& g) {
    if (!gx) return;
    Mat& buf = tp.grad_buffer(xid);
    for (Eigen::Index r = 0; r < saved.rows(); ++r) {
      double dot = (g.row(r).array() * saved.row(r).array()).sum();
      buf.row(r).array() += saved.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var l2_normalize_rows(Var x) {
  Tape& t = *x.tape;
  const Mat& xv = t.value(x);
  Mat out(xv.rows(), xv.cols());
  Vecd norms(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double n = std::max(xv.row(r).norm(), 1e-12);
    norms[r] = n;
    out.row(r) = xv.row(r) / n;
  }
  bool gx = t.requires_grad(x);
  int xid = x.id;
  Mat saved = out;
  return t.record(std::move(out), gx, [xid, gx, saved, norms](Tape& tp, const Mat& g) {
    if (!gx) return;
    Mat& buf = tp.grad_buffer(xid);
    for (Eigen::Index r = 0; r < saved.rows(); ++r) {
      double dot = (g.row(r).array() * saved.row(r).array()).sum();
      buf.row(r).array() += (g.row(r).array() - saved.row(r).array() * dot) / norms[r];
    }
  });
}

Var embedding_lookup(Var table, const std::vector<int>& indices) {
  return gather_rows(table, indices);
}

Var cross_entropy_with_logits(Var logits, const std::vector<int>& targets) {
  Tape& t = *logits.tape;
  const Mat& lv = t.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != lv.rows())
    raise(Err::ShapeMismatch, "cross_entropy: one target per row required");
  for (int tr : targets)
    if (tr < 0 || tr >= lv.cols()) raise(Err::IndexOutOfRange, "target class out of range");

  const Eigen::Index rows = lv.rows();
  Mat probs(lv.rows(), lv.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mx = lv.row(r).maxCoeff();
    Eigen::RowVectorXd e = (lv.row(r).array() - mx).exp();
    double z = e.sum();
    probs.row(r) = e / z;
    loss += std::log(z) + mx - lv(r, targets[r]);
  }
  Mat out(1, 1);
  out(0, 0) = loss / static_cast<double>(rows);

  bool gl = t.requires_grad(logits);
  int lid = logits.id;
  return t.record(std::move(out), gl, [lid, gl, probs, targets](Tape& tp, const Mat& g) {
    if (!gl) return;
    Mat& buf = tp.grad_buffer(lid);
    const double inv_n = 1.0 / static_cast<double>(probs.rows());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      buf.row(r) += g(0, 0) * inv_n * probs.row(r);
      buf(r, targets[r]) -= g(0, 0) * inv_n;
    }
  });
}

Var mse(Var pred, const Mat& target) {
  Tape& t = *pred.tape;
  const Mat& pv = t.value(pred);
  check_same_shape(pv, target, "mse");
  const double n = static_cast<double>(pv.size());
  Mat diff = pv - target;
  Mat out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  bool gp = t.requires_grad(pred);
  int pid = pred.id;
  return t.record(std::move(out), gp, [pid, gp, diff, n](Tape& tp, const Mat& g) {
    if (gp) tp.grad_buffer(pid) += (2.0 / n) * g(0, 0) * diff;
  });
}

Var stop_gradient(Var x) {
  Tape& t = *x.tape;
  return t.constant(t.value(x));
}

Var straight_through(Var continuous, const Mat& quantized) {
  Tape& t = *continuous.tape;
  check_same_shape(t.value(continuous), quantized, "straight_through");
  bool gc = t.requires_grad(continuous);
  int cid = continuous.id;
  return t.record(quantized, gc, [cid, gc](Tape& tp, const Mat& g) {
    if (gc) tp.grad_buffer(cid) += g;
  });
}

Var conv1d(Var x, Var kernels, Var bias, const Conv1dSpec& spec) {
  check_same_tape(x, kernels);
  check_same_tape(x, bias);
  Tape& t = *x.tape;
  const Mat& xv = t.value(x);
  const Mat& kv = t.value(kernels);
  const Mat& bv = t.value(bias);
  if (xv.cols() != static_cast<Eigen::Index>(spec.in_channels) * spec.in_len)
    raise(Err::ShapeMismatch, "conv1d: rows must pack in_channels*in_len columns");
  if (kv.rows() != spec.out_channels ||
      kv.cols() != static_cast<Eigen::Index>(spec.in_channels) * spec.kernel)
    raise(Err::ShapeMismatch, "conv1d: kernels must be out_ch x (in_ch*k)");
  if (bv.rows() != 1 || bv.cols() != spec.out_channels)
    raise(Err::ShapeMismatch, "conv1d: bias must be 1 x out_ch");

  const int lo = spec.out_len();
  if (lo < 1) raise(Err::ShapeMismatch, "conv1d: empty output");
  const Eigen::Index rows = xv.rows();
  Mat out(rows, static_cast<Eigen::Index>(spec.out_channels) * lo);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int oc = 0; oc < spec.out_channels; ++oc) {
      for (int p = 0; p < lo; ++p) {
        double acc = bv(0, oc);
        const int start = p * spec.stride - spec.pad;
        for (int ic = 0; ic < spec.in_channels; ++ic) {
          for (int k = 0; k < spec.kernel; ++k) {
            const int pos = start + k;
            if (pos < 0 || pos >= spec.in_len) continue;
            acc += xv(r, ic * spec.in_len + pos) * kv(oc, ic * spec.kernel + k);
          }
        }
        out(r, oc * lo + p) = acc;
      }
    }
  }

  bool gx = t.requires_grad(x), gk = t.requires_grad(kernels), gb = t.requires_grad(bias);
  int xid = x.id, kid = kernels.id, bid = bias.id;
  Conv1dSpec sp = spec;
  return t.record(std::move(out), gx || gk || gb, [=](Tape& tp, const Mat& g) {
    const Mat& xin = tp.value(Var{&tp, xid});
    const Mat& ker = tp.value(Var{&tp, kid});
    const int lo2 = sp.out_len();
    if (gb) {
      Mat& bbuf = tp.grad_buffer(bid);
      for (int oc = 0; oc < sp.out_channels; ++oc)
        bbuf(0, oc) += g.middleCols(static_cast<Eigen::Index>(oc) * lo2, lo2).sum();
    }
    Mat* kbuf = gk ? &tp.grad_buffer(kid) : nullptr;
    Mat* xbuf = gx ? &tp.grad_buffer(xid) : nullptr;
    for (Eigen::Index r = 0; r < xin.rows(); ++r) {
      for (int oc = 0; oc < sp.out_channels; ++oc) {
        for (int p = 0; p < lo2; ++p) {
          const double go = g(r, oc * lo2 + p);
          if (go == 0.0) continue;
          const int start = p * sp.stride - sp.pad;
          for (int ic = 0; ic < sp.in_channels; ++ic) {
            for (int k = 0; k < sp.kernel; ++k) {
              const int pos = start + k;
              if (pos < 0 || pos >= sp.in_len) continue;
              if (kbuf) (*kbuf)(oc, ic * sp.kernel + k) += go * xin(r, ic * sp.in_len + pos);
              if (xbuf) (*xbuf)(r, ic * sp.in_len + pos) += go * ker(oc, ic * sp.kernel + k);
            }
          }
        }
      }
    }
  });
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Mat& x, double eps) {
  if (!(eps > 0.0)) raise(Err::ShapeMismatch, "grad_check eps must be positive");

  Tape tape;
  Var input = tape.leaf(x);
  Var out = f(tape, input);
  const Mat& ov = tape.value(out);
  if (ov.rows() != 1 || ov.cols() != 1)
    raise(Err::NonScalarOutput, "grad_check needs a scalar-valued function");
  tape.backward(out);
  Mat analytic = tape.grad(input);

  auto eval = [&](const Mat& point) {
    Tape tp;
    Var in = tp.leaf(point);
    Var o = f(tp, in);
    return tp.value(o)(0, 0);
  };

  double worst = 0.0;
  Mat probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe(i);
    probe(i) = saved + eps;
    const double hi = eval(probe);
    probe(i) = saved - eps;
    const double lo = eval(probe);
    probe(i) = saved;
    const double cd = (hi - lo) / (2.0 * eps);
    const double a = analytic(i);
    const double rel = std::abs(a - cd) / (std::abs(a) + std::abs(cd) + 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace neurotok
