/*
 * Copyright 2026 The genclass Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Layer primitives with explicit forward/backward passes. Each layer caches
// what its backward pass needs during a kTrain forward; backward accumulates
// into Parameter::grad and returns the gradient w.r.t. the layer input.

#ifndef GENCLASS_NN_LAYERS_HPP
#define GENCLASS_NN_LAYERS_HPP

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "genclass/errors.hpp"
#include "genclass/nn/tensor.hpp"

namespace genclass::nn {

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad)
      : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(pad),
        weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}) {}

  void init(std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(in_) * k_ * k_;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : weight_.value) v = static_cast<T>(dist(rng));
  }

  int out_size(int in_size) const { return (in_size + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.c != in_) throw ShapeError("conv " + weight_.name + ": expected " + std::to_string(in_) +
                                     " input channels, got " + std::to_string(x.c));
    const int ho = out_size(x.h), wo = out_size(x.w);
    Tensor<T> y(x.n, out_, ho, wo);
    const int rows = in_ * k_ * k_;
    col_.resize(static_cast<std::size_t>(rows) * ho * wo);
    ConstMatrixMap<T> wmat(weight_.value.data(), out_, rows);
    for (int i = 0; i < x.n; ++i) {
      im2col(x.sample(i), x.h, x.w, ho, wo);
      ConstMatrixMap<T> col(col_.data(), rows, ho * wo);
      MatrixMap<T> out(y.sample(i), out_, ho * wo);
      out.noalias() = wmat * col;
    }
    if (mode == Mode::kTrain) input_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = input_;
    const int ho = dy.h, wo = dy.w;
    const int rows = in_ * k_ * k_;
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    col_.resize(static_cast<std::size_t>(rows) * ho * wo);
    dcol_.resize(col_.size());
    ConstMatrixMap<T> wmat(weight_.value.data(), out_, rows);
    MatrixMap<T> dw(weight_.grad.data(), out_, rows);
    for (int i = 0; i < x.n; ++i) {
      im2col(x.sample(i), x.h, x.w, ho, wo);
      ConstMatrixMap<T> col(col_.data(), rows, ho * wo);
      ConstMatrixMap<T> g(dy.sample(i), out_, ho * wo);
      dw.noalias() += g * col.transpose();
      MatrixMap<T> dcol(dcol_.data(), rows, ho * wo);
      dcol.noalias() = wmat.transpose() * g;
      col2im(dx.sample(i), x.h, x.w, ho, wo);
    }
    return dx;
  }

  void collect(ParameterList<T>& params) { params.push_back(&weight_); }
  void collect_state(StateList<T>& state) { state.push_back({weight_.name, weight_.shape, &weight_.value}); }

 private:
  void im2col(const T* src, int h, int w, int ho, int wo) {
    T* dst = col_.data();
    for (int c = 0; c < in_; ++c) {
      const T* plane = src + static_cast<std::size_t>(c) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              std::fill(dst, dst + wo, T(0));
              dst += wo;
              continue;
            }
            const T* row = plane + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              *dst++ = (ix >= 0 && ix < w) ? row[ix] : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(T* dst, int h, int w, int ho, int wo) const {
    const T* src = dcol_.data();
    for (int c = 0; c < in_; ++c) {
      T* plane = dst + static_cast<std::size_t>(c) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              src += wo;
              continue;
            }
            T* row = plane + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < wo; ++ox, ++src) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) row[ix] += *src;
            }
          }
        }
      }
    }
  }

  int in_ = 0, out_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  Parameter<T> weight_;
  Tensor<T> input_;
  Buffer<T> col_;
  Buffer<T> dcol_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels)
      : channels_(channels),
        gamma_(name + ".gamma", {channels}),
        beta_(name + ".beta", {channels}),
        running_mean_(channels, T(0)),
        running_var_(channels, T(1)),
        name_(std::move(name)) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const std::size_t plane = x.plane();
    const double count = static_cast<double>(x.n) * plane;
    if (mode == Mode::kTrain) {
      xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
      inv_std_.assign(channels_, T(0));
    }
    for (int c = 0; c < channels_; ++c) {
      double mean, var;
      if (mode == Mode::kTrain) {
        double s = 0.0;
        for (int i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + c * plane;
          for (std::size_t j = 0; j < plane; ++j) s += p[j];
        }
        mean = s / count;
        double ss = 0.0;
        for (int i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + c * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            const double d = p[j] - mean;
            ss += d * d;
          }
        }
        var = ss / count;
        const double unbiased = count > 1 ? ss / (count - 1) : var;
        running_mean_[c] = static_cast<T>((1 - kMomentum) * running_mean_[c] + kMomentum * mean);
        running_var_[c] = static_cast<T>((1 - kMomentum) * running_var_[c] + kMomentum * unbiased);
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const T inv_std = static_cast<T>(1.0 / std::sqrt(var + kEps));
      const T m = static_cast<T>(mean);
      const T g = gamma_.value[c], b = beta_.value[c];
      for (int i = 0; i < x.n; ++i) {
        const T* p = x.sample(i) + c * plane;
        T* q = y.sample(i) + c * plane;
        if (mode == Mode::kTrain) {
          T* xh = xhat_.sample(i) + c * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            xh[j] = (p[j] - m) * inv_std;
            q[j] = g * xh[j] + b;
          }
        } else {
          for (std::size_t j = 0; j < plane; ++j) q[j] = g * (p[j] - m) * inv_std + b;
        }
      }
      if (mode == Mode::kTrain) inv_std_[c] = inv_std;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t plane = dy.plane();
    const double count = static_cast<double>(dy.n) * plane;
    for (int c = 0; c < channels_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < dy.n; ++i) {
        const T* g = dy.sample(i) + c * plane;
        const T* xh = xhat_.sample(i) + c * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          sum_dy += g[j];
          sum_dy_xhat += g[j] * xh[j];
        }
      }
      gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const T scale = static_cast<T>(gamma_.value[c] * inv_std_[c] / count);
      const T mean_dy = static_cast<T>(sum_dy);
      const T mean_dy_xhat = static_cast<T>(sum_dy_xhat);
      const T n = static_cast<T>(count);
      for (int i = 0; i < dy.n; ++i) {
        const T* g = dy.sample(i) + c * plane;
        const T* xh = xhat_.sample(i) + c * plane;
        T* d = dx.sample(i) + c * plane;
        for (std::size_t j = 0; j < plane; ++j) d[j] = scale * (n * g[j] - mean_dy - xh[j] * mean_dy_xhat);
      }
    }
    return dx;
  }

  void collect(ParameterList<T>& params) {
    params.push_back(&gamma_);
    params.push_back(&beta_);
  }
  void collect_state(StateList<T>& state) {
    state.push_back({gamma_.name, gamma_.shape, &gamma_.value});
    state.push_back({beta_.name, beta_.shape, &beta_.value});
    state.push_back({name_ + ".running_mean", {channels_}, &running_mean_});
    state.push_back({name_ + ".running_var", {channels_}, &running_var_});
  }

 private:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  int channels_ = 0;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Buffer<T> running_mean_;
  Buffer<T> running_var_;
  std::string name_;
  Tensor<T> xhat_;
  Buffer<T> inv_std_;
};

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    if (mode == Mode::kTrain) output_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(output_.data[i] > T(0))) dx.data[i] = T(0);
    return dx;
  }

 private:
  Tensor<T> output_;
};

template <typename T>
class GlobalAvgPool {
 public:
  Matrix<T> forward(const Tensor<T>& x) {
    n_ = x.n; c_ = x.c; h_ = x.h; w_ = x.w;
    Matrix<T> out(x.n, x.c);
    const std::size_t plane = x.plane();
    for (int i = 0; i < x.n; ++i)
      for (int c = 0; c < x.c; ++c) {
        const T* p = x.sample(i) + c * plane;
        T s = T(0);
        for (std::size_t j = 0; j < plane; ++j) s += p[j];
        out(i, c) = s / static_cast<T>(plane);
      }
    return out;
  }

  Tensor<T> backward(const Matrix<T>& dy) const {
    Tensor<T> dx(n_, c_, h_, w_);
    const std::size_t plane = dx.plane();
    const T inv = T(1) / static_cast<T>(plane);
    for (int i = 0; i < n_; ++i)
      for (int c = 0; c < c_; ++c) {
        T* p = dx.sample(i) + c * plane;
        std::fill(p, p + plane, dy(i, c) * inv);
      }
    return dx;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

/// Fully connected layer, y = x W^T + b with W stored (out, in).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features)
      : in_(in_features), out_(out_features),
        weight_(name + ".weight", {out_features, in_features}),
        bias_(name + ".bias", {out_features}) {}

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : weight_.value) v = static_cast<T>(dist(rng));
    for (auto& v : bias_.value) v = static_cast<T>(dist(rng));
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Matrix<T> forward(const Matrix<T>& x, Mode mode) {
    if (x.cols() != in_) throw ShapeError("linear " + weight_.name + ": expected " + std::to_string(in_) +
                                          " features, got " + std::to_string(x.cols()));
    ConstMatrixMap<T> w(weight_.value.data(), out_, in_);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), out_);
    Matrix<T> y = x * w.transpose();
    y.rowwise() += b;
    if (mode == Mode::kTrain) input_ = x;
    return y;
  }

  Matrix<T> backward(const Matrix<T>& dy) {
    MatrixMap<T> dw(weight_.grad.data(), out_, in_);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.grad.data(), out_);
    dw.noalias() += dy.transpose() * input_;
    db += dy.colwise().sum();
    ConstMatrixMap<T> w(weight_.value.data(), out_, in_);
    return dy * w;
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

  void collect(ParameterList<T>& params) {
    params.push_back(&weight_);
    params.push_back(&bias_);
  }
  void collect_state(StateList<T>& state) {
    state.push_back({weight_.name, weight_.shape, &weight_.value});
    state.push_back({bias_.name, bias_.shape, &bias_.value});
  }

 private:
  int in_ = 0, out_ = 0;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Matrix<T> input_;
};

}  // namespace genclass::nn

#endif  // GENCLASS_NN_LAYERS_HPP
