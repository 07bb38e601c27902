#pragma once

#include "neurotok/common.hpp"

#include <functional>
#include <span>
#include <vector>

namespace neurotok {

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape owns every node produced during one forward pass. Values are stored
// in double: the gradient contracts in this project are validated by central
// finite differences at 1e-4 relative tolerance, which single-precision
// per-op rounding cannot meet.
using Mat = Matd;

class Tape;

// Cheap handle into a tape; ops are free functions over handles.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  // receives the output node's accumulated gradient
  using BackFn = std::function<void(Tape&, const Mat&)>;

  // gradient-tracked node (parameter or differentiated input)
  Var leaf(Mat value);
  // node excluded from differentiation
  Var constant(Mat value);

  const Mat& value(Var v) const;
  // gradient buffer, valid after backward(); zero matrix when untouched
  const Mat& grad(Var v) const;

  // seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse; the loss node
  // must be 1×1
  void backward(Var scalar_loss);

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- used by op implementations ---
  Var record(Mat value, bool requires_grad, BackFn back);
  bool requires_grad(Var v) const;
  Mat& grad_buffer(int id);

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackFn back;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// elementwise / structural
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_rowvec(Var a, Var row);  // broadcast a 1×n row over every row of a
Var matmul(Var a, Var b);
Var transpose(Var a);
Var slice_rows(Var a, int first, int count);
Var slice_cols(Var a, int first, int count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var a, const std::vector<int>& indices);

// reductions (f64 accumulation is native here)
Var sum(Var a);   // 1×1
Var mean(Var a);  // 1×1

// nonlinearities and normalizations
Var gelu(Var a);
Var tanh_op(Var a);
Var cos_op(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);  // per row
Var softmax_rows(Var x);
Var l2_normalize_rows(Var x);

// lookups and losses
Var embedding_lookup(Var table, const std::vector<int>& indices);
Var cross_entropy_with_logits(Var logits, const std::vector<int>& targets);  // mean over rows
Var mse(Var pred, const Mat& target);  // mean over elements

// forward identity, zero gradient contribution
Var stop_gradient(Var x);

// forward returns `quantized`; backward routes the incoming gradient
// unchanged to `continuous` (codebooks learn via EMA, never via this path)
Var straight_through(Var continuous, const Mat& quantized);

// 1-D convolution over rows packed as [in_ch × len]; kernels are
// out_ch×(in_ch·k); output rows are [out_ch × len_out]
struct Conv1dSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int in_len = 0;

  int out_len() const { return (in_len + 2 * pad - kernel) / stride + 1; }
};
Var conv1d(Var x, Var kernels, Var bias, const Conv1dSpec& spec);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// Max over coordinates of |analytic - central difference| /
// (|analytic| + |cd| + 1e-8) for a scalar-valued f evaluated at x.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Mat& x, double eps = 1e-4);

}  // namespace neurotok
