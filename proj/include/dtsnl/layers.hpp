/**
 * Copyright 2026 The dtsnl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dtsnl/tensor.hpp"

// Forward/backward kernels for the small convolutional backbone. Parameters are
// passed as spans into a flat parameter buffer; backward passes accumulate into
// the matching spans of a gradient buffer of identical layout.

namespace dtsnl::layers {

/// Same-padded, stride-1 square convolution. Weight layout [out][in][k][k].
struct Conv2d {
  int in = 0, out = 0, k = 3;

  size_t weight_count() const { return static_cast<size_t>(out) * in * k * k; }
  size_t param_count() const { return weight_count() + static_cast<size_t>(out); }

  // col[(ci*k + ky)*k + kx][y*W + x], rows `ld` apart so several samples can
  // share one column matrix side by side.
  template <typename T>
  void im2col(const T* x, int H, int W, T* col, size_t ld) const {
    const int pad = k / 2;
    for (int ci = 0; ci < in; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          T* row = col + ((static_cast<size_t>(ci) * k + ky) * k + kx) * ld;
          for (int y = 0; y < H; ++y) {
            const int sy = y + ky - pad;
            T* r = row + static_cast<size_t>(y) * W;
            if (sy < 0 || sy >= H) {
              std::fill(r, r + W, T(0));
              continue;
            }
            const T* src = x + (static_cast<size_t>(ci) * H + sy) * W;
            for (int xx = 0; xx < W; ++xx) {
              const int sx = xx + kx - pad;
              r[xx] = (sx < 0 || sx >= W) ? T(0) : src[sx];
            }
          }
        }
  }

  template <typename T>
  void col2im(const T* col, int H, int W, T* dx, size_t ld) const {
    const int pad = k / 2;
    for (int ci = 0; ci < in; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const T* row = col + ((static_cast<size_t>(ci) * k + ky) * k + kx) * ld;
          for (int y = 0; y < H; ++y) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= H) continue;
            T* dst = dx + (static_cast<size_t>(ci) * H + sy) * W;
            const T* r = row + static_cast<size_t>(y) * W;
            for (int xx = 0; xx < W; ++xx) {
              const int sx = xx + kx - pad;
              if (sx >= 0 && sx < W) dst[sx] += r[xx];
            }
          }
        }
  }

  // Samples per column matrix, keeping it near 4M entries.
  int chunk(int n, int K, int P) const {
    return std::clamp(static_cast<int>((size_t{1} << 17) / (static_cast<size_t>(K) * P)), 1, std::max(n, 1));
  }

  template <typename T>
  Tensor4<T> forward(const Tensor4<T>& x, std::span<const T> params) const {
    DTSNL_CHECK(x.c == in, "conv: expected " + std::to_string(in) + " input channels, got " + std::to_string(x.c));
    const int K = in * k * k;
    const int P = x.h * x.w;
    const T* weight = params.data();
    const T* bias = params.data() + weight_count();
    Tensor4<T> y(x.n, out, x.h, x.w);
    const int nb = chunk(x.n, K, P);
    std::vector<T> col, ybig;
    for (int i0 = 0; i0 < x.n; i0 += nb) {
      const int m = std::min(nb, x.n - i0);
      const size_t ld = static_cast<size_t>(m) * P;
      col.resize(static_cast<size_t>(K) * ld);
      ybig.resize(static_cast<size_t>(out) * ld);
      for (int i = 0; i < m; ++i) im2col(x.sample(i0 + i), x.h, x.w, col.data() + static_cast<size_t>(i) * P, ld);
      for (int o = 0; o < out; ++o) std::fill(ybig.begin() + o * ld, ybig.begin() + (o + 1) * ld, bias[o]);
      blas::gemm_nn(out, static_cast<int>(ld), K, weight, col.data(), ybig.data());
      for (int i = 0; i < m; ++i)
        for (int o = 0; o < out; ++o)
          std::copy_n(ybig.data() + o * ld + static_cast<size_t>(i) * P, P, y.sample(i0 + i) + static_cast<size_t>(o) * P);
    }
    return y;
  }

  /// Accumulates parameter gradients into `grads`; returns dL/dx.
  template <typename T>
  Tensor4<T> backward(const Tensor4<T>& x, const Tensor4<T>& dy, std::span<const T> params, std::span<T> grads,
                      bool need_dx = true) const {
    const int K = in * k * k;
    const int P = x.h * x.w;
    const T* weight = params.data();
    T* dweight = grads.data();
    T* dbias = grads.data() + weight_count();
    Tensor4<T> dx;
    if (need_dx) dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    const int nb = chunk(x.n, K, P);
    std::vector<T> col, dybig, dcol;
    for (int i0 = 0; i0 < x.n; i0 += nb) {
      const int m = std::min(nb, x.n - i0);
      const size_t ld = static_cast<size_t>(m) * P;
      col.resize(static_cast<size_t>(K) * ld);
      dybig.resize(static_cast<size_t>(out) * ld);
      for (int i = 0; i < m; ++i) {
        im2col(x.sample(i0 + i), x.h, x.w, col.data() + static_cast<size_t>(i) * P, ld);
        for (int o = 0; o < out; ++o)
          std::copy_n(dy.sample(i0 + i) + static_cast<size_t>(o) * P, P, dybig.data() + o * ld + static_cast<size_t>(i) * P);
      }
      // dW[out x K] += dY[out x mP] * col^T
      blas::gemm_nt(out, K, static_cast<int>(ld), dybig.data(), col.data(), dweight);
      for (int o = 0; o < out; ++o) {
        T s = 0;
        for (size_t p = 0; p < ld; ++p) s += dybig[o * ld + p];
        dbias[o] += s;
      }
      if (need_dx) {
        // dcol[K x mP] = W^T * dY
        dcol.assign(static_cast<size_t>(K) * ld, T(0));
        blas::gemm_tn(K, static_cast<int>(ld), out, weight, dybig.data(), dcol.data());
        for (int i = 0; i < m; ++i) col2im(dcol.data() + static_cast<size_t>(i) * P, x.h, x.w, dx.sample(i0 + i), ld);
      }
    }
    return dx;
  }
};

template <typename T>
void relu_inplace(Tensor4<T>& x) {
  for (T& v : x.data) v = v > T(0) ? v : T(0);
}

/// dy masked by the positive part of the (post-ReLU) activation.
template <typename T>
void relu_backward_inplace(const Tensor4<T>& activated, Tensor4<T>& dy) {
  for (size_t i = 0; i < dy.data.size(); ++i)
    if (!(activated.data[i] > T(0))) dy.data[i] = T(0);
}

/// 2x2 stride-2 max pooling (floor). `argmax` receives flat input indices.
template <typename T>
Tensor4<T> maxpool2(const Tensor4<T>& x, std::vector<uint32_t>& argmax) {
  Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
  argmax.assign(y.size(), 0);
  size_t o = 0;
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          uint32_t arg = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              size_t idx = ((static_cast<size_t>(i) * x.c + c) * x.h + 2 * yy + dy) * x.w + 2 * xx + dx;
              if (x.data[idx] > best) {
                best = x.data[idx];
                arg = static_cast<uint32_t>(idx);
              }
            }
          y.data[o] = best;
          argmax[o] = arg;
        }
  return y;
}

template <typename T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& x_shape, const std::vector<uint32_t>& argmax, const Tensor4<T>& dy) {
  Tensor4<T> dx(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
  for (size_t o = 0; o < dy.size(); ++o) dx.data[argmax[o]] += dy.data[o];
  return dx;
}

template <typename T>
Matrix<T> global_avg_pool(const Tensor4<T>& x) {
  Matrix<T> g(x.n, x.c);
  const size_t P = x.plane();
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c) {
      const T* p = x.sample(i) + c * P;
      T s = 0;
      for (size_t j = 0; j < P; ++j) s += p[j];
      g(i, c) = s / static_cast<T>(P);
    }
  return g;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Matrix<T>& dg, int h, int w) {
  Tensor4<T> dx(dg.rows, dg.cols, h, w);
  const size_t P = dx.plane();
  for (int i = 0; i < dg.rows; ++i)
    for (int c = 0; c < dg.cols; ++c) {
      T v = dg(i, c) / static_cast<T>(P);
      T* p = dx.sample(i) + c * P;
      std::fill(p, p + P, v);
    }
  return dx;
}

/// Fully connected layer, weight layout [out][in] followed by bias[out].
struct Linear {
  int in = 0, out = 0;

  size_t param_count() const { return static_cast<size_t>(out) * in + out; }

  template <typename T>
  Matrix<T> forward(const Matrix<T>& x, std::span<const T> params) const {
    DTSNL_CHECK(x.cols == in, "linear: input width mismatch");
    const T* W = params.data();
    const T* b = params.data() + static_cast<size_t>(out) * in;
    Matrix<T> y(x.rows, out);
    for (int r = 0; r < x.rows; ++r)
      for (int o = 0; o < out; ++o) {
        T s = b[o];
        for (int i = 0; i < in; ++i) s += W[static_cast<size_t>(o) * in + i] * x(r, i);
        y(r, o) = s;
      }
    return y;
  }

  template <typename T>
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy, std::span<const T> params, std::span<T> grads) const {
    const T* W = params.data();
    T* dW = grads.data();
    T* db = grads.data() + static_cast<size_t>(out) * in;
    Matrix<T> dx(x.rows, in);
    for (int r = 0; r < x.rows; ++r)
      for (int o = 0; o < out; ++o) {
        const T g = dy(r, o);
        db[o] += g;
        for (int i = 0; i < in; ++i) {
          dW[static_cast<size_t>(o) * in + i] += g * x(r, i);
          dx(r, i) += g * W[static_cast<size_t>(o) * in + i];
        }
      }
    return dx;
  }
};

}  // namespace dtsnl::layers
