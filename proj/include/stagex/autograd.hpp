// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Minimal reverse-mode differentiation over dense (channels x frames)
// matrices. Every op builds a Node holding its value and, when gradients are
// enabled and some input requires them, a closure that propagates the node's
// gradient into its inputs. Backward() walks the graph in reverse topological
// order.
//
// Waveforms travel through the graph as 1 x length matrices; feature maps as
// channels x frames; embeddings as dim x 1.

#ifndef STAGEX_AUTOGRAD_HPP_
#define STAGEX_AUTOGRAD_HPP_

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace stagex::ag {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node &)> backward;
  bool requires_grad = false;

  Matrix &GradBuffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix &value() const { return node_->value; }
  Matrix &mutable_value() { return node_->value; }
  // Gradient after Backward(); a zero matrix if nothing reached this node.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }
  void ZeroGrad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }

  const std::shared_ptr<Node> &node() const { return node_; }
  // Parameter identity: two Vars refer to the same storage.
  bool SameAs(const Var &other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var Parameter(Matrix init);
Var Constant(Matrix value);

// Seeds d root / d root = 1 for a 1x1 root and accumulates gradients into
// every reachable node that requires them. Interior graph state is released
// as it is consumed, so each graph can be differentiated once.
void Backward(const Var &root);

bool GradEnabled();

// Disables graph construction on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool previous_;
};

// ---- elementwise / linear algebra ----
Var MatMul(const Var &w, const Var &x);
Var AddBias(const Var &x, const Var &bias);  // bias: rows x 1
Var Add(const Var &a, const Var &b);
Var Mul(const Var &a, const Var &b);
Var Scale(const Var &x, double c);
// x * target_rms / sqrt(mean(x^2) + eps).
Var ScaleToRms(const Var &x, double target_rms);
Var Sum(std::span<const Var> terms);  // all same shape
Var Relu(const Var &x);
Var PRelu(const Var &x, const Var &slope);  // slope: 1x1
// Normalises over all entries, then per-row affine (gamma/beta: rows x 1).
Var GlobalLayerNorm(const Var &x, const Var &gamma, const Var &beta);

// ---- shape manipulation ----
Var ConcatRows(std::span<const Var> parts);
Var ConcatCols(const Var &a, const Var &b);
Var RepeatCols(const Var &column, Eigen::Index count);
Var MeanCols(const Var &x);
// Non-overlapping average pooling of width `width` along columns; the ragged
// tail is dropped unless there are fewer than `width` columns.
Var AvgPoolCols(const Var &x, int width);

// ---- convolutions ----
// x: 1 x len waveform, weight: out_channels x kernel. Produces
// out_channels x frames with frame t covering samples [t*stride, t*stride+kernel),
// zero-padded past the end of x.
Var FrameConv(const Var &x, const Var &weight, int stride, Eigen::Index frames);
// Transposed FrameConv: x: in_channels x frames, weight: kernel x in_channels.
// Overlap-adds frames at `stride` into a 1 x out_len signal (truncated or
// zero-padded to out_len).
Var OverlapAdd(const Var &x, const Var &weight, int stride, Eigen::Index out_len);
// Per-row dilated convolution, "same" padding. weight: rows x kernel, odd kernel.
Var DepthwiseConv(const Var &x, const Var &weight, int dilation);

// ---- signal heads ----
// w1*a + w2*b + w3*c for 1 x len signals and 1x1 weights.
Var Fuse3(const Var &a, const Var &b, const Var &c, const Var &w1,
          const Var &w2, const Var &w3);
// -SI-SDR(estimate, reference) as a 1x1 value.
Var SiSdrLoss(const Var &estimate, std::span<const double> reference);
// Softmax cross-entropy of a C x 1 logit column against a class index.
Var CrossEntropy(const Var &logits, int label);

}  // namespace stagex::ag

#endif  // STAGEX_AUTOGRAD_HPP_
