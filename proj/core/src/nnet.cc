// embedprobe/nnet.cc
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

#include "embedprobe/nnet.h"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "embedprobe/common.h"

namespace embedprobe {

std::string ActivationName(Activation a) {
  switch (a) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  throw ConfigError("bad activation enum");
}

Activation ActivationFromName(const std::string &name) {
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name +
                    "' (want sigmoid|relu|identity)");
}

std::string OptKindName(OptKind k) {
  switch (k) {
    case OptKind::kSgd: return "sgd";
    case OptKind::kRmsProp: return "rmsprop";
  }
  throw ConfigError("bad optimizer enum");
}

OptKind OptKindFromName(const std::string &name) {
  if (name == "sgd") return OptKind::kSgd;
  if (name == "rmsprop") return OptKind::kRmsProp;
  throw ConfigError("unknown optimizer '" + name + "' (want sgd|rmsprop)");
}

namespace {

void GlorotInit(Mat *w, Rng *rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(w->rows() + w->cols()));
  for (long i = 0; i < w->rows(); ++i) {
    for (long j = 0; j < w->cols(); ++j) {
      (*w)(i, j) = rng->Uniform(-limit, limit);
    }
  }
}

inline Mat SigmoidOf(const Mat &z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

}  // namespace

DenseLayer::DenseLayer(const std::string &name, int in_dim, int out_dim,
                       Activation act)
    : activation(act),
      w(name + "/W", out_dim, in_dim),
      b(name + "/b", out_dim, 1) {
  if (in_dim < 1 || out_dim < 1) {
    throw ConfigError("dense layer '" + name + "': dims must be >= 1");
  }
}

void DenseLayer::Init(Rng *rng) { GlorotInit(&w.value, rng); }

Mat DenseLayer::Forward(const Mat &x) const {
  Mat z = x * w.value.transpose();
  z.rowwise() += b.value.col(0).transpose();
  switch (activation) {
    case Activation::kSigmoid: return SigmoidOf(z);
    case Activation::kRelu: return z.cwiseMax(0.0);
    case Activation::kIdentity: return z;
  }
  throw ConfigError("bad activation enum");
}

Mat DenseLayer::Backward(const Mat &x, const Mat &y, const Mat &dy) {
  Mat dz;
  switch (activation) {
    case Activation::kSigmoid:
      dz = dy.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
      break;
    case Activation::kRelu:
      dz = dy.cwiseProduct((y.array() > 0.0).cast<double>().matrix());
      break;
    case Activation::kIdentity:
      dz = dy;
      break;
  }
  w.grad += dz.transpose() * x;
  b.grad.col(0) += dz.colwise().sum().transpose();
  return dz * w.value;
}

SoftmaxHead::SoftmaxHead(const std::string &name, int in_dim, int n_classes)
    : w(name + "/W", n_classes, in_dim), b(name + "/b", n_classes, 1) {
  if (n_classes < 2) {
    throw ConfigError("softmax head '" + name + "': need >= 2 classes");
  }
}

void SoftmaxHead::Init(Rng *rng) { GlorotInit(&w.value, rng); }

Mat SoftmaxHead::Logits(const Mat &x) const {
  Mat z = x * w.value.transpose();
  z.rowwise() += b.value.col(0).transpose();
  return z;
}

double SoftmaxHead::LossAndGrad(const Mat &x, const std::vector<int> &labels,
                                Mat *dx, double weight) {
  const long n = x.rows();
  if (static_cast<long>(labels.size()) != n) {
    throw ConfigError("softmax head: label count does not match batch");
  }
  Mat z = Logits(x);
  double loss = 0;
  // In place: z becomes the probability rows, then the logit gradient.
  for (long i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= n_classes()) {
      throw ConfigError("softmax head: label out of range");
    }
    const double lse = LogSumExp(z.row(i).transpose());
    loss += lse - z(i, label);
    z.row(i) = (z.row(i).array() - lse).exp().matrix();
    z(i, label) -= 1.0;
  }
  loss = weight * loss / n;
  z *= weight / static_cast<double>(n);
  w.grad += z.transpose() * x;
  b.grad.col(0) += z.colwise().sum().transpose();
  if (dx) *dx += z * w.value;
  return loss;
}

int SoftmaxHead::Predict(const Vec &x) const {
  Vec z = w.value * x + b.value.col(0);
  int arg = 0;
  z.maxCoeff(&arg);
  return arg;
}

LstmCell::LstmCell(const std::string &name, int input_dim, int hidden_dim)
    : wx(name + "/Wx", 4 * hidden_dim, input_dim),
      wh(name + "/Wh", 4 * hidden_dim, hidden_dim),
      b(name + "/b", 4 * hidden_dim, 1) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw ConfigError("lstm cell '" + name + "': dims must be >= 1");
  }
}

void LstmCell::Init(Rng *rng) {
  GlorotInit(&wx.value, rng);
  GlorotInit(&wh.value, rng);
  const int h = hidden_dim();
  b.value.setZero();
  b.value.block(h, 0, h, 1).setConstant(1.0);  // forget-gate block
}

void LstmCell::StepKernel(const Vec &x, const Vec &h_prev, const Vec &c_prev,
                          Vec *i, Vec *f, Vec *o, Vec *g, Vec *c_t,
                          Vec *tanh_c, Vec *h_t) const {
  const int h = hidden_dim();
  Vec z = wx.value * x + wh.value * h_prev + b.value.col(0);
  *i = (1.0 / (1.0 + (-z.segment(0, h).array()).exp())).matrix();
  *f = (1.0 / (1.0 + (-z.segment(h, h).array()).exp())).matrix();
  *o = (1.0 / (1.0 + (-z.segment(2 * h, h).array()).exp())).matrix();
  *g = z.segment(3 * h, h).array().tanh().matrix();
  *c_t = f->cwiseProduct(c_prev) + i->cwiseProduct(*g);
  *tanh_c = c_t->array().tanh().matrix();
  *h_t = o->cwiseProduct(*tanh_c);
}

void LstmCell::Step(const Vec &x, const Vec &h_prev, const Vec &c_prev,
                    Vec *h_t, Vec *c_t) const {
  if (x.size() != input_dim() || h_prev.size() != hidden_dim() ||
      c_prev.size() != hidden_dim()) {
    throw ConfigError("lstm step: shape mismatch");
  }
  Vec i, f, o, g, tanh_c;
  StepKernel(x, h_prev, c_prev, &i, &f, &o, &g, c_t, &tanh_c, h_t);
}

Vec LstmCell::Forward(const Mat &x, Tape *tape) const {
  if (x.cols() != input_dim()) {
    throw ConfigError("lstm forward: input dim mismatch");
  }
  const int t_steps = static_cast<int>(x.rows());
  const int hd = hidden_dim();
  if (t_steps < 1) throw ConfigError("lstm forward: empty sequence");
  if (tape) {
    tape->x = x;
    for (Mat *m : {&tape->i, &tape->f, &tape->o, &tape->g, &tape->c,
                   &tape->tanh_c, &tape->h}) {
      m->resize(t_steps, hd);
    }
  }
  Vec h_prev = Vec::Zero(hd), c_prev = Vec::Zero(hd);
  Vec i, f, o, g, c_t, tanh_c, h_t;
  for (int t = 0; t < t_steps; ++t) {
    StepKernel(x.row(t).transpose(), h_prev, c_prev, &i, &f, &o, &g, &c_t,
               &tanh_c, &h_t);
    if (tape) {
      tape->i.row(t) = i.transpose();
      tape->f.row(t) = f.transpose();
      tape->o.row(t) = o.transpose();
      tape->g.row(t) = g.transpose();
      tape->c.row(t) = c_t.transpose();
      tape->tanh_c.row(t) = tanh_c.transpose();
      tape->h.row(t) = h_t.transpose();
    }
    h_prev = h_t;
    c_prev = c_t;
  }
  return h_prev;
}

void LstmCell::Backward(const Tape &tape, const Vec &dh_last) {
  const int t_steps = tape.Steps();
  const int hd = hidden_dim();
  if (dh_last.size() != hd) throw ConfigError("lstm backward: dh mismatch");
  Mat dz_all(t_steps, 4 * hd);
  Vec dh = dh_last;
  Vec dc = Vec::Zero(hd);
  for (int t = t_steps - 1; t >= 0; --t) {
    const Vec i = tape.i.row(t).transpose();
    const Vec f = tape.f.row(t).transpose();
    const Vec o = tape.o.row(t).transpose();
    const Vec g = tape.g.row(t).transpose();
    const Vec tanh_c = tape.tanh_c.row(t).transpose();

    Vec d_o = dh.cwiseProduct(tanh_c);
    dc += dh.cwiseProduct(o).cwiseProduct(
        (1.0 - tanh_c.array().square()).matrix());
    Vec c_prev = t > 0 ? Vec(tape.c.row(t - 1).transpose()) : Vec::Zero(hd);
    Vec d_i = dc.cwiseProduct(g);
    Vec d_f = dc.cwiseProduct(c_prev);
    Vec d_g = dc.cwiseProduct(i);

    dz_all.row(t).segment(0, hd) =
        d_i.cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix())
            .transpose();
    dz_all.row(t).segment(hd, hd) =
        d_f.cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix())
            .transpose();
    dz_all.row(t).segment(2 * hd, hd) =
        d_o.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix())
            .transpose();
    dz_all.row(t).segment(3 * hd, hd) =
        d_g.cwiseProduct((1.0 - g.array().square()).matrix()).transpose();

    const Vec dz = dz_all.row(t).transpose();
    dh = wh.value.transpose() * dz;
    dc = dc.cwiseProduct(f);
  }
  wx.grad += dz_all.transpose() * tape.x;
  if (t_steps > 1) {
    wh.grad += dz_all.bottomRows(t_steps - 1).transpose() *
               tape.h.topRows(t_steps - 1);
  }
  b.grad.col(0) += dz_all.colwise().sum().transpose();
}

Optimizer::Optimizer(OptKind kind, double lr, double rho, double eps)
    : kind_(kind), lr_(lr), rho_(rho), eps_(eps) {
  if (lr <= 0) throw ConfigError("optimizer: lr must be > 0");
  if (rho <= 0 || rho >= 1) throw ConfigError("optimizer: rho must be in (0,1)");
}

void Optimizer::Attach(const std::vector<Param *> &params) {
  params_ = params;
  mean_sq_.clear();
  for (const Param *p : params_) {
    mean_sq_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Optimizer::Step() {
  for (size_t k = 0; k < params_.size(); ++k) {
    Param *p = params_[k];
    if (!AllFinite(p->grad)) {
      throw NumericError("optimizer: non-finite gradient in " + p->name);
    }
    if (kind_ == OptKind::kSgd) {
      p->value -= lr_ * p->grad;
    } else {
      Mat &s = mean_sq_[k];
      s = rho_ * s + (1.0 - rho_) * p->grad.cwiseProduct(p->grad);
      p->value -=
          (lr_ * p->grad.array() / (s.array().sqrt() + eps_)).matrix();
    }
  }
}

TrainResult TrainLoop(
    int n_train, const TrainOptions &opts, Rng *rng,
    const std::vector<Param *> &params,
    const std::function<double(const std::vector<int> &)> &batch_step,
    const std::function<double()> &dev_metric) {
  if (n_train < 1) throw ConfigError("train: empty training set");
  if (opts.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (opts.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  Optimizer optimizer(opts.optimizer, opts.lr, opts.rho, opts.eps);
  optimizer.Attach(params);

  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Mat> best_values;
  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    rng->Shuffle(&order);
    double epoch_loss = 0;
    int n_batches = 0;
    for (int start = 0; start < n_train; start += opts.batch_size) {
      const int b = std::min(opts.batch_size, n_train - start);
      std::vector<int> batch(order.begin() + start,
                             order.begin() + start + b);
      for (Param *p : params) p->ZeroGrad();
      const double loss = batch_step(batch);
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches));
      }
      optimizer.Step();
      epoch_loss += loss;
      ++n_batches;
    }
    epoch_loss /= n_batches;
    const double dev = dev_metric();
    result.train_loss.push_back(epoch_loss);
    result.dev_metric.push_back(dev);
    if (opts.verbose) {
      std::fprintf(stderr, "epoch %3d  loss %.6f  dev %.4f\n", epoch,
                   epoch_loss, dev);
    }
    if (result.best_epoch < 0 || dev > result.best_dev) {
      result.best_epoch = epoch;
      result.best_dev = dev;
      best_values.clear();
      for (const Param *p : params) best_values.push_back(p->value);
    } else if (epoch - result.best_epoch >= opts.patience) {
      break;
    }
  }
  for (size_t k = 0; k < params.size(); ++k) {
    params[k]->value = best_values[k];
  }
  return result;
}

Mlp::Mlp(int in_dim, int hidden_dim, int n_classes, Activation act)
    : hidden("hidden", in_dim, hidden_dim, act),
      head("head", hidden_dim, n_classes) {}

void Mlp::Init(Rng *rng) {
  hidden.Init(rng);
  head.Init(rng);
}

double Mlp::BatchLossAndGrad(const Mat &x, const std::vector<int> &labels) {
  Mat h = hidden.Forward(x);
  Mat dh = Mat::Zero(h.rows(), h.cols());
  const double loss = head.LossAndGrad(h, labels, &dh);
  hidden.Backward(x, h, dh);
  return loss;
}

int Mlp::Predict(const Vec &x) const {
  Mat h = hidden.Forward(Mat(x.transpose()));
  return head.Predict(h.row(0).transpose());
}

std::vector<Param *> Mlp::Params() {
  return {&hidden.w, &hidden.b, &head.w, &head.b};
}

Vec FlattenValues(const std::vector<Param *> &params) {
  long total = 0;
  for (const Param *p : params) total += p->value.size();
  Vec out(total);
  long at = 0;
  for (const Param *p : params) {
    for (long i = 0; i < p->value.rows(); ++i) {
      for (long j = 0; j < p->value.cols(); ++j) out(at++) = p->value(i, j);
    }
  }
  return out;
}

Vec FlattenGrads(const std::vector<Param *> &params) {
  long total = 0;
  for (const Param *p : params) total += p->grad.size();
  Vec out(total);
  long at = 0;
  for (const Param *p : params) {
    for (long i = 0; i < p->grad.rows(); ++i) {
      for (long j = 0; j < p->grad.cols(); ++j) out(at++) = p->grad(i, j);
    }
  }
  return out;
}

void SetValues(const std::vector<Param *> &params, const Vec &theta) {
  long at = 0;
  for (Param *p : params) {
    for (long i = 0; i < p->value.rows(); ++i) {
      for (long j = 0; j < p->value.cols(); ++j) p->value(i, j) = theta(at++);
    }
  }
}

}  // namespace embedprobe
