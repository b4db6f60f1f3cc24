// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "stagex/error.hpp"
#include "stagex/signal.hpp"

namespace stagex::ag {

namespace {

thread_local bool g_grad_enabled = true;

constexpr double kNormEps = 1e-8;

std::span<const double> Row(const Matrix &m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

// Builds the result node; the closure is kept only when some input needs it.
Var Make(Matrix value, std::vector<Var> inputs,
         std::function<void(Node &)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Var &v) { return v.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto &v : inputs) node->inputs.push_back(v.node());
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

// Gradient sink for input i, or nullptr if that input does not need one.
Matrix *Sink(Node &n, std::size_t i) {
  Node &in = *n.inputs[i];
  return in.requires_grad ? &in.GradBuffer() : nullptr;
}

void Require(bool cond, const std::string &msg) {
  if (!cond) throw ArgumentError(msg);
}

}  // namespace

Matrix &Node::GradBuffer() {
  if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

Var Parameter(Matrix init) {
  auto node = std::make_shared<Node>();
  node->value = std::move(init);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var Constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void Backward(const Var &root) {
  Require(root.defined() && root.rows() == 1 && root.cols() == 1,
          "backward: root must be a scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order. `order` owns the
  // nodes so that releasing edges below cannot free one still queued.
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node *> seen;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->inputs.size()) {
      std::shared_ptr<Node> child = node->inputs[next++];
      if (child->requires_grad && seen.insert(child.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  root.node()->GradBuffer().array() += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node *n = it->get();
    if (n->backward && n->grad.size() != 0) n->backward(*n);
    if (!n->inputs.empty()) {
      // Interior node: release graph edges and the consumed gradient.
      n->backward = nullptr;
      n->inputs.clear();
      n->grad.resize(0, 0);
    }
  }
}

Var MatMul(const Var &w, const Var &x) {
  Require(w.cols() == x.rows(), "matmul: inner dimension mismatch (" +
                                    std::to_string(w.cols()) + " vs " +
                                    std::to_string(x.rows()) + ")");
  Matrix y;
  y.noalias() = w.value() * x.value();
  return Make(std::move(y), {w, x}, [](Node &n) {
    const Matrix &w = n.inputs[0]->value;
    const Matrix &x = n.inputs[1]->value;
    if (Matrix *gw = Sink(n, 0)) gw->noalias() += n.grad * x.transpose();
    if (Matrix *gx = Sink(n, 1)) gx->noalias() += w.transpose() * n.grad;
  });
}

Var AddBias(const Var &x, const Var &bias) {
  Require(bias.rows() == x.rows() && bias.cols() == 1, "add_bias: shape mismatch");
  Matrix y = x.value().colwise() + bias.value().col(0);
  return Make(std::move(y), {x, bias}, [](Node &n) {
    if (Matrix *gx = Sink(n, 0)) *gx += n.grad;
    if (Matrix *gb = Sink(n, 1)) *gb += n.grad.rowwise().sum();
  });
}

Var Add(const Var &a, const Var &b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return Make(a.value() + b.value(), {a, b}, [](Node &n) {
    if (Matrix *ga = Sink(n, 0)) *ga += n.grad;
    if (Matrix *gb = Sink(n, 1)) *gb += n.grad;
  });
}

Var Mul(const Var &a, const Var &b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  return Make(a.value().cwiseProduct(b.value()), {a, b}, [](Node &n) {
    const Matrix &a = n.inputs[0]->value;
    const Matrix &b = n.inputs[1]->value;
    if (Matrix *ga = Sink(n, 0)) *ga += n.grad.cwiseProduct(b);
    if (Matrix *gb = Sink(n, 1)) *gb += n.grad.cwiseProduct(a);
  });
}

Var Scale(const Var &x, double c) {
  return Make(x.value() * c, {x}, [c](Node &n) {
    if (Matrix *gx = Sink(n, 0)) *gx += c * n.grad;
  });
}

Var ScaleToRms(const Var &x, double target_rms) {
  const double count = static_cast<double>(x.value().size());
  const double rms = std::sqrt(x.value().squaredNorm() / count + kNormEps);
  const double c = target_rms / rms;
  return Make(x.value() * c, {x}, [c, rms, count](Node &n) {
    if (Matrix *gx = Sink(n, 0)) {
      const Matrix &x = n.inputs[0]->value;
      const double proj = n.grad.cwiseProduct(x).sum() / (count * rms * rms);
      *gx += c * (n.grad - proj * x);
    }
  });
}

Var Sum(std::span<const Var> terms) {
  Require(!terms.empty(), "sum: no terms");
  Matrix y = terms[0].value();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    Require(terms[i].rows() == y.rows() && terms[i].cols() == y.cols(),
            "sum: shape mismatch");
    y += terms[i].value();
  }
  return Make(std::move(y), std::vector<Var>(terms.begin(), terms.end()), [](Node &n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (Matrix *g = Sink(n, i)) *g += n.grad;
    }
  });
}

Var Relu(const Var &x) {
  return Make(x.value().cwiseMax(0.0), {x}, [](Node &n) {
    if (Matrix *gx = Sink(n, 0)) {
      *gx += (n.inputs[0]->value.array() > 0.0).select(n.grad, 0.0).matrix();
    }
  });
}

Var PRelu(const Var &x, const Var &slope) {
  Require(slope.rows() == 1 && slope.cols() == 1, "prelu: slope must be 1x1");
  const double a = slope.scalar();
  Matrix y = (x.value().array() > 0.0).select(x.value(), a * x.value());
  return Make(std::move(y), {x, slope}, [a](Node &n) {
    const Matrix &x = n.inputs[0]->value;
    auto pos = x.array() > 0.0;
    if (Matrix *gx = Sink(n, 0)) *gx += pos.select(n.grad, a * n.grad).matrix();
    if (Matrix *gs = Sink(n, 1)) {
      (*gs)(0, 0) += pos.select(0.0, x.cwiseProduct(n.grad)).sum();
    }
  });
}

Var GlobalLayerNorm(const Var &x, const Var &gamma, const Var &beta) {
  Require(gamma.rows() == x.rows() && beta.rows() == x.rows(),
          "layer_norm: affine shape mismatch");
  const double count = static_cast<double>(x.value().size());
  const double mean = x.value().mean();
  const double var = (x.value().array() - mean).square().sum() / count;
  const double inv_std = 1.0 / std::sqrt(var + kNormEps);
  auto xhat = std::make_shared<Matrix>((x.value().array() - mean) * inv_std);
  Matrix y = (xhat->array().colwise() * gamma.value().col(0).array()).colwise() +
             beta.value().col(0).array();
  return Make(std::move(y), {x, gamma, beta}, [xhat, inv_std, count](Node &n) {
    const Matrix &gamma = n.inputs[1]->value;
    if (Matrix *gg = Sink(n, 1)) *gg += n.grad.cwiseProduct(*xhat).rowwise().sum();
    if (Matrix *gb = Sink(n, 2)) *gb += n.grad.rowwise().sum();
    if (Matrix *gx = Sink(n, 0)) {
      Matrix dxhat = n.grad.array().colwise() * gamma.col(0).array();
      const double mean_d = dxhat.sum() / count;
      const double mean_dx = dxhat.cwiseProduct(*xhat).sum() / count;
      gx->array() += inv_std * (dxhat.array() - mean_d - xhat->array() * mean_dx);
    }
  });
}

Var ConcatRows(std::span<const Var> parts) {
  Require(!parts.empty(), "concat_rows: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto &p : parts) {
    Require(p.cols() == cols, "concat_rows: frame count mismatch (" +
                                  std::to_string(p.cols()) + " vs " +
                                  std::to_string(cols) + ")");
    rows += p.rows();
  }
  Matrix y(rows, cols);
  Eigen::Index r = 0;
  for (const auto &p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return Make(std::move(y), std::vector<Var>(parts.begin(), parts.end()), [](Node &n) {
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      Eigen::Index h = n.inputs[i]->value.rows();
      if (Matrix *g = Sink(n, i)) *g += n.grad.middleRows(r, h);
      r += h;
    }
  });
}

Var ConcatCols(const Var &a, const Var &b) {
  Require(a.rows() == b.rows(), "concat_cols: row mismatch");
  Matrix y(a.rows(), a.cols() + b.cols());
  y.leftCols(a.cols()) = a.value();
  y.rightCols(b.cols()) = b.value();
  return Make(std::move(y), {a, b}, [](Node &n) {
    Eigen::Index ca = n.inputs[0]->value.cols();
    Eigen::Index cb = n.inputs[1]->value.cols();
    if (Matrix *ga = Sink(n, 0)) *ga += n.grad.leftCols(ca);
    if (Matrix *gb = Sink(n, 1)) *gb += n.grad.rightCols(cb);
  });
}

Var RepeatCols(const Var &column, Eigen::Index count) {
  Require(column.cols() == 1, "repeat_cols: expected a column");
  Matrix y = column.value().replicate(1, count);
  return Make(std::move(y), {column}, [](Node &n) {
    if (Matrix *g = Sink(n, 0)) *g += n.grad.rowwise().sum();
  });
}

Var MeanCols(const Var &x) {
  const double inv = 1.0 / static_cast<double>(x.cols());
  Matrix y = x.value().rowwise().sum() * inv;
  return Make(std::move(y), {x}, [inv](Node &n) {
    if (Matrix *g = Sink(n, 0)) g->colwise() += n.grad.col(0) * inv;
  });
}

Var AvgPoolCols(const Var &x, int width) {
  Require(width >= 1, "avg_pool: width must be positive");
  const Eigen::Index in_cols = x.cols();
  const int w = in_cols < width ? static_cast<int>(in_cols) : width;
  const Eigen::Index out_cols = in_cols / w;
  Matrix y(x.rows(), out_cols);
  for (Eigen::Index t = 0; t < out_cols; ++t) {
    y.col(t) = x.value().middleCols(t * w, w).rowwise().sum() / w;
  }
  return Make(std::move(y), {x}, [w, out_cols](Node &n) {
    if (Matrix *g = Sink(n, 0)) {
      for (Eigen::Index t = 0; t < out_cols; ++t) {
        g->middleCols(t * w, w).colwise() += n.grad.col(t) / w;
      }
    }
  });
}

Var FrameConv(const Var &x, const Var &weight, int stride, Eigen::Index frames) {
  Require(x.rows() == 1, "frame_conv: input must be a 1 x len signal");
  Require(stride >= 1 && frames >= 1, "frame_conv: bad stride/frames");
  const Eigen::Index kernel = weight.cols();
  const Eigen::Index len = x.cols();
  const double *src = x.value().data();
  auto cols = std::make_shared<Matrix>(Matrix::Zero(kernel, frames));
  for (Eigen::Index t = 0; t < frames; ++t) {
    Eigen::Index start = t * stride;
    Eigen::Index n = std::clamp<Eigen::Index>(len - start, 0, kernel);
    if (n > 0) std::copy(src + start, src + start + n, cols->col(t).data());
  }
  Matrix y;
  y.noalias() = weight.value() * (*cols);
  return Make(std::move(y), {x, weight}, [cols, stride, len](Node &n) {
    const Matrix &w = n.inputs[1]->value;
    if (Matrix *gw = Sink(n, 1)) gw->noalias() += n.grad * cols->transpose();
    if (Matrix *gx = Sink(n, 0)) {
      Matrix gcols;
      gcols.noalias() = w.transpose() * n.grad;
      double *dst = gx->data();
      for (Eigen::Index t = 0; t < gcols.cols(); ++t) {
        Eigen::Index start = t * stride;
        Eigen::Index cnt = std::clamp<Eigen::Index>(len - start, 0, gcols.rows());
        for (Eigen::Index j = 0; j < cnt; ++j) dst[start + j] += gcols(j, t);
      }
    }
  });
}

Var OverlapAdd(const Var &x, const Var &weight, int stride, Eigen::Index out_len) {
  Require(weight.cols() == x.rows(), "overlap_add: channel mismatch");
  const Eigen::Index kernel = weight.rows();
  const Eigen::Index frames = x.cols();
  Matrix segs;
  segs.noalias() = weight.value() * x.value();
  Matrix y = Matrix::Zero(1, out_len);
  double *dst = y.data();
  for (Eigen::Index t = 0; t < frames; ++t) {
    Eigen::Index start = t * stride;
    Eigen::Index cnt = std::clamp<Eigen::Index>(out_len - start, 0, kernel);
    for (Eigen::Index j = 0; j < cnt; ++j) dst[start + j] += segs(j, t);
  }
  return Make(std::move(y), {x, weight}, [stride, kernel, frames, out_len](Node &n) {
    Matrix gsegs = Matrix::Zero(kernel, frames);
    const double *g = n.grad.data();
    for (Eigen::Index t = 0; t < frames; ++t) {
      Eigen::Index start = t * stride;
      Eigen::Index cnt = std::clamp<Eigen::Index>(out_len - start, 0, kernel);
      for (Eigen::Index j = 0; j < cnt; ++j) gsegs(j, t) = g[start + j];
    }
    const Matrix &x = n.inputs[0]->value;
    const Matrix &w = n.inputs[1]->value;
    if (Matrix *gx = Sink(n, 0)) gx->noalias() += w.transpose() * gsegs;
    if (Matrix *gw = Sink(n, 1)) gw->noalias() += gsegs * x.transpose();
  });
}

Var DepthwiseConv(const Var &x, const Var &weight, int dilation) {
  Require(weight.rows() == x.rows(), "depthwise_conv: channel mismatch");
  Require(weight.cols() % 2 == 1, "depthwise_conv: kernel must be odd");
  const Eigen::Index frames = x.cols();
  const Eigen::Index center = weight.cols() / 2;
  Matrix y = Matrix::Zero(x.rows(), frames);
  for (Eigen::Index k = 0; k < weight.cols(); ++k) {
    Eigen::Index off = (k - center) * dilation;
    Eigen::Index n = frames - std::abs(off);
    if (n <= 0) continue;
    Eigen::Index t0 = std::max<Eigen::Index>(0, -off);
    y.middleCols(t0, n).array() +=
        x.value().middleCols(t0 + off, n).array().colwise() *
        weight.value().col(k).array();
  }
  return Make(std::move(y), {x, weight}, [dilation, center, frames](Node &n) {
    const Matrix &x = n.inputs[0]->value;
    const Matrix &w = n.inputs[1]->value;
    Matrix *gx = Sink(n, 0);
    Matrix *gw = Sink(n, 1);
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      Eigen::Index off = (k - center) * dilation;
      Eigen::Index cnt = frames - std::abs(off);
      if (cnt <= 0) continue;
      Eigen::Index t0 = std::max<Eigen::Index>(0, -off);
      auto g = n.grad.middleCols(t0, cnt);
      if (gx) {
        gx->middleCols(t0 + off, cnt).array() += g.array().colwise() * w.col(k).array();
      }
      if (gw) {
        gw->col(k) += g.cwiseProduct(x.middleCols(t0 + off, cnt)).rowwise().sum();
      }
    }
  });
}

Var Fuse3(const Var &a, const Var &b, const Var &c, const Var &w1,
          const Var &w2, const Var &w3) {
  Require(a.rows() == 1 && b.rows() == 1 && c.rows() == 1,
          "fuse: inputs must be 1 x len signals");
  Require(a.cols() == b.cols() && a.cols() == c.cols(), "fuse: length mismatch");
  Matrix y(1, a.cols());
  FuseInto({Row(a.value()), Row(b.value()), Row(c.value())},
           {w1.scalar(), w2.scalar(), w3.scalar()},
           std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
  return Make(std::move(y), {a, b, c, w1, w2, w3}, [](Node &n) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (Matrix *g = Sink(n, i)) *g += n.inputs[i + 3]->value(0, 0) * n.grad;
    }
    auto gw = FuseWeightsVjp({Row(n.inputs[0]->value), Row(n.inputs[1]->value),
                              Row(n.inputs[2]->value)},
                             Row(n.grad));
    for (std::size_t i = 0; i < 3; ++i) {
      if (Matrix *g = Sink(n, i + 3)) (*g)(0, 0) += gw[i];
    }
  });
}

Var SiSdrLoss(const Var &estimate, std::span<const double> reference) {
  Require(estimate.rows() == 1, "si_sdr_loss: estimate must be 1 x len");
  LossWithGrad lg = SiSdrLossGrad(Row(estimate.value()), reference);
  Matrix y(1, 1);
  y(0, 0) = lg.value;
  auto grad = std::make_shared<std::vector<double>>(std::move(lg.grad));
  return Make(std::move(y), {estimate}, [grad](Node &n) {
    if (Matrix *g = Sink(n, 0)) {
      const double up = n.grad(0, 0);
      double *dst = g->data();
      for (std::size_t i = 0; i < grad->size(); ++i) dst[i] += up * (*grad)[i];
    }
  });
}

Var CrossEntropy(const Var &logits, int label) {
  Require(logits.cols() == 1, "cross_entropy: logits must be a column");
  Require(label >= 0 && label < logits.rows(),
          "cross_entropy: label " + std::to_string(label) + " out of range [0, " +
              std::to_string(logits.rows()) + ")");
  const Matrix &z = logits.value();
  const double zmax = z.maxCoeff();
  auto prob = std::make_shared<Matrix>((z.array() - zmax).exp().matrix());
  const double total = prob->sum();
  *prob /= total;
  Matrix y(1, 1);
  y(0, 0) = zmax + std::log(total) - z(label, 0);
  return Make(std::move(y), {logits}, [prob, label](Node &n) {
    if (Matrix *g = Sink(n, 0)) {
      Matrix d = *prob;
      d(label, 0) -= 1.0;
      *g += n.grad(0, 0) * d;
    }
  });
}

}  // namespace stagex::ag
