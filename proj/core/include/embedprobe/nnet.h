// embedprobe/nnet.h
//
// Copyright 2026  The Embedprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal neural stack: dense layers, an LSTM cell, softmax
// cross-entropy heads, SGD and RMSprop, and a generic early-stopping
// train loop. Every backward pass is exact (finite-difference checked in
// the tests); there is no autodiff.

#ifndef EMBEDPROBE_NNET_H_
#define EMBEDPROBE_NNET_H_

#include <functional>
#include <string>
#include <vector>

#include "embedprobe/numerics.h"
#include "embedprobe/rng.h"

namespace embedprobe {

enum class Activation { kSigmoid, kRelu, kIdentity };
std::string ActivationName(Activation a);
Activation ActivationFromName(const std::string &name);

/// Named parameter tensor with its gradient accumulator. Vectors are
/// stored as n x 1.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param(std::string param_name, int rows, int cols)
      : name(std::move(param_name)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)) {}
  void ZeroGrad() { grad.setZero(); }
};

/// y = act(W x + b). Batched: rows of x are samples.
class DenseLayer {
 public:
  DenseLayer(const std::string &name, int in_dim, int out_dim,
             Activation act);

  /// Glorot-uniform weights, zero bias.
  void Init(Rng *rng);

  Mat Forward(const Mat &x) const;  // B x in -> B x out
  /// Accumulates parameter gradients and returns dL/dx. y must be the
  /// matching Forward output (the activation derivative is taken from it).
  Mat Backward(const Mat &x, const Mat &y, const Mat &dy);

  std::vector<Param *> Params() { return {&w, &b}; }
  int in_dim() const { return static_cast<int>(w.value.cols()); }
  int out_dim() const { return static_cast<int>(w.value.rows()); }

  Activation activation;
  Param w;  // out x in
  Param b;  // out x 1
};

/// Softmax + cross-entropy output layer, K >= 2 classes.
class SoftmaxHead {
 public:
  SoftmaxHead(const std::string &name, int in_dim, int n_classes);

  void Init(Rng *rng);

  Mat Logits(const Mat &x) const;  // B x K
  /// Mean cross-entropy over the batch, scaled by `weight`. Parameter
  /// gradients (scaled by weight / B) are accumulated; when dx is nonnull
  /// the input gradient is ADDED into it (callers combining several heads
  /// zero it once).
  double LossAndGrad(const Mat &x, const std::vector<int> &labels, Mat *dx,
                     double weight = 1.0);
  int Predict(const Vec &x) const;

  std::vector<Param *> Params() { return {&w, &b}; }
  int in_dim() const { return static_cast<int>(w.value.cols()); }
  int n_classes() const { return static_cast<int>(w.value.rows()); }

  Param w;  // K x in
  Param b;  // K x 1
};

/// Single LSTM cell. Packed gate rows in block order (input, forget,
/// output, candidate):
///   z   = Wx x_t + Wh h_prev + b
///   i,f,o = sigmoid(z blocks), g = tanh(z block)
///   c_t = f (.) c_prev + i (.) g
///   h_t = o (.) tanh(c_t)
class LstmCell {
 public:
  LstmCell(const std::string &name, int input_dim, int hidden_dim);

  /// Glorot-uniform weights; zero bias except the forget-gate block at +1
  /// so early training does not wash out the cell state.
  void Init(Rng *rng);

  void Step(const Vec &x, const Vec &h_prev, const Vec &c_prev, Vec *h_t,
            Vec *c_t) const;

  /// Per-step values cached by Forward for backpropagation through time.
  struct Tape {
    Mat x;                         // T x I
    Mat i, f, o, g, c, tanh_c, h;  // T x H each
    int Steps() const { return static_cast<int>(x.rows()); }
  };

  /// Unrolled forward from the zero state; returns h_T. The arithmetic is
  /// exactly T applications of Step (same kernel, same order).
  Vec Forward(const Mat &x, Tape *tape) const;

  /// BPTT from a gradient at the final hidden state; accumulates into the
  /// parameter gradients.
  void Backward(const Tape &tape, const Vec &dh_last);

  std::vector<Param *> Params() { return {&wx, &wh, &b}; }
  int input_dim() const { return static_cast<int>(wx.value.cols()); }
  int hidden_dim() const { return static_cast<int>(wh.value.cols()); }

  Param wx;  // 4H x I
  Param wh;  // 4H x H
  Param b;   // 4H x 1

 private:
  // Shared step kernel so Step and Forward are bit-identical.
  void StepKernel(const Vec &x, const Vec &h_prev, const Vec &c_prev, Vec *i,
                  Vec *f, Vec *o, Vec *g, Vec *c_t, Vec *tanh_c,
                  Vec *h_t) const;
};

enum class OptKind { kSgd, kRmsProp };
std::string OptKindName(OptKind k);
OptKind OptKindFromName(const std::string &name);

/// SGD / RMSprop over a fixed parameter list.
///   sgd:     theta <- theta - lr g
///   rmsprop: s <- rho s + (1 - rho) g^2; theta <- theta - lr g/(sqrt(s)+eps)
/// Non-finite gradients abort with NumericError (never clamped).
class Optimizer {
 public:
  Optimizer(OptKind kind, double lr, double rho = 0.9, double eps = 1e-8);

  void Attach(const std::vector<Param *> &params);
  void Step();

  OptKind kind() const { return kind_; }

 private:
  OptKind kind_;
  double lr_, rho_, eps_;
  std::vector<Param *> params_;
  std::vector<Mat> mean_sq_;  // rmsprop accumulators, >= 0
};

struct TrainOptions {
  int max_epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
  OptKind optimizer = OptKind::kRmsProp;
  double rho = 0.9;
  double eps = 1e-8;
  int patience = 10;  // epochs without dev improvement before stopping
  bool verbose = false;
};

struct TrainResult {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> dev_metric;  // per epoch, higher is better
  int best_epoch = -1;
  double best_dev = 0.0;
};

/// Generic training loop: seeded shuffle per epoch, fixed-order batches,
/// optimizer step per batch, dev evaluation per epoch, early stopping,
/// best-dev snapshot restored before returning. batch_step receives the
/// sample indices of one batch with all gradients already zeroed and must
/// return the mean batch loss while accumulating gradients. Non-finite
/// loss aborts with NumericError.
TrainResult TrainLoop(
    int n_train, const TrainOptions &opts, Rng *rng,
    const std::vector<Param *> &params,
    const std::function<double(const std::vector<int> &)> &batch_step,
    const std::function<double()> &dev_metric);

/// The probing classifier: one hidden layer + softmax.
struct Mlp {
  DenseLayer hidden;
  SoftmaxHead head;

  Mlp(int in_dim, int hidden_dim, int n_classes,
      Activation act = Activation::kRelu);
  void Init(Rng *rng);
  double BatchLossAndGrad(const Mat &x, const std::vector<int> &labels);
  int Predict(const Vec &x) const;
  std::vector<Param *> Params();
};

// Parameter-vector helpers shared by the gradient-check tests.
Vec FlattenValues(const std::vector<Param *> &params);
Vec FlattenGrads(const std::vector<Param *> &params);
void SetValues(const std::vector<Param *> &params, const Vec &theta);

}  // namespace embedprobe

#endif  // EMBEDPROBE_NNET_H_
