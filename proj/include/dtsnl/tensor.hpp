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
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dtsnl/error.hpp"

#ifdef DTSNL_USE_CBLAS
#include <cblas.h>
#endif

namespace dtsnl {

/// Dense NCHW batch. A plain value type: copying copies the data.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t sample_size() const { return static_cast<size_t>(c) * plane(); }
  size_t size() const { return data.size(); }

  T* sample(int i) { return data.data() + static_cast<size_t>(i) * sample_size(); }
  const T* sample(int i) const { return data.data() + static_cast<size_t>(i) * sample_size(); }

  T& at(int i, int ch, int y, int x) { return data[((static_cast<size_t>(i) * c + ch) * h + y) * w + x]; }
  T at(int i, int ch, int y, int x) const { return data[((static_cast<size_t>(i) * c + ch) * h + y) * w + x]; }

  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  std::string shape_string() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }

  bool finite() const {
    return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(static_cast<double>(v)); });
  }
};

/// Row-major 2-D matrix, used for logits and pooled features.
template <typename T>
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c, T fill = T(0)) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  T& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  T operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  std::span<T> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
  std::span<const T> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
};

namespace blas {

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C) {
  for (int i = 0; i < M; ++i) {
    T* c = C + static_cast<size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const T a = A[static_cast<size_t>(i) * K + k];
      if (a == T(0)) continue;
      const T* b = B + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

// C[M x N] += A^T * B, with A stored as [K x M] and B as [K x N]
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C) {
  for (int k = 0; k < K; ++k) {
    const T* b = B + static_cast<size_t>(k) * N;
    for (int i = 0; i < M; ++i) {
      const T a = A[static_cast<size_t>(k) * M + i];
      if (a == T(0)) continue;
      T* c = C + static_cast<size_t>(i) * N;
      for (int j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

// C[M x N] += A * B^T, with A stored as [M x K] and B as [N x K]
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<size_t>(i) * K;
    for (int j = 0; j < N; ++j) {
      const T* b = B + static_cast<size_t>(j) * K;
      T acc = 0;
      for (int k = 0; k < K; ++k) acc += a[k] * b[k];
      C[static_cast<size_t>(i) * N + j] += acc;
    }
  }
}

#ifdef DTSNL_USE_CBLAS
// Single-precision overloads routed to an optimized BLAS.
inline void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, M, N, K, 1.0f, A, K, B, N, 1.0f, C, N);
}

inline void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C) {
  cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, M, N, K, 1.0f, A, M, B, N, 1.0f, C, N);
}

inline void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, M, N, K, 1.0f, A, K, B, K, 1.0f, C, N);
}
#endif

}  // namespace blas

}  // namespace dtsnl
