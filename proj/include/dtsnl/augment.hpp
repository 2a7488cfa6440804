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
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "dtsnl/error.hpp"
#include "dtsnl/image.hpp"
#include "dtsnl/random.hpp"

namespace dtsnl {

enum class AugOp {
  kRotate,
  kSharpness,
  kShearX,
  kShearY,
  kTranslateX,
  kTranslateY,
  kIdentity,
  kContrast,
  kColor,
  kBrightness,
  kEqualize,
  kSolarize,
  kPosterize,
  kAutoContrast,
};

inline constexpr std::array<std::string_view, 14> kAugOpNames = {
    "Rotate",   "Sharpness", "Shear-x",    "Shear-y",  "Translate-x", "Translate-y", "Identity",
    "Contrast", "Color",     "Brightness", "Equalize", "Solarize",    "Posterize",   "AutoContrast"};

inline std::string_view aug_op_name(AugOp op) { return kAugOpNames[static_cast<size_t>(op)]; }

inline AugOp parse_aug_op(std::string_view name) {
  for (size_t i = 0; i < kAugOpNames.size(); ++i)
    if (kAugOpNames[i] == name) return static_cast<AugOp>(i);
  throw InvalidArgument("unknown augmentation op '" + std::string(name) + "'");
}

/// Geometry shared by weak, strong and evaluation preprocessing.
struct AugmentConfig {
  int working_size = 256;
  int crop_size = 224;
  double flip_prob = 0.5;
  bool center_crop = false;  // forces the crop window to the center
  float fill = 0.0f;         // background for geometric ops

  void validate() const {
    DTSNL_CHECK(crop_size > 0 && working_size >= crop_size, "augment: need working_size >= crop_size > 0");
    DTSNL_CHECK(flip_prob >= 0.0 && flip_prob <= 1.0, "augment: flip_prob outside [0,1]");
  }
};

/// RandAugment-style policy: `n_ops` draws with replacement from `op_table`.
struct AugmentPolicy {
  enum class Kind { kWeak, kStrong };

  Kind kind = Kind::kWeak;
  int n_ops = 0;
  int magnitude = 0;
  std::vector<AugOp> op_table;

  static AugmentPolicy weak() { return {}; }

  static AugmentPolicy strong(int n_ops = 3, int magnitude = 5, const std::vector<std::string>& subset = {}) {
    DTSNL_CHECK(n_ops >= 0, "strong policy: n_ops must be >= 0");
    DTSNL_CHECK(magnitude >= 0 && magnitude <= 10, "strong policy: magnitude must be in [0,10]");
    AugmentPolicy p;
    p.kind = Kind::kStrong;
    p.n_ops = n_ops;
    p.magnitude = magnitude;
    if (subset.empty()) {
      for (size_t i = 0; i < kAugOpNames.size(); ++i) p.op_table.push_back(static_cast<AugOp>(i));
    } else {
      for (const auto& name : subset) p.op_table.push_back(parse_aug_op(name));
    }
    return p;
  }
};

namespace detail {

inline float luminance(const Image& img, int y, int x) {
  if (img.channels() < 3) return img.at(0, y, x);
  return 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
}

/// out = degenerate + factor * (img - degenerate)
inline Image blend(const Image& degenerate, const Image& img, float factor) {
  Image out = img;
  auto& o = out.data();
  const auto& d = degenerate.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = d[i] + factor * (o[i] - d[i]);
  out.clamp01();
  return out;
}

/// Inverse-mapped affine warp about the image center, nearest-neighbour sampling.
/// (sx, sy) = M * (x - cx, y - cy) + (cx, cy) + (tx, ty)
inline Image warp(const Image& img, const std::array<float, 4>& m, float tx, float ty, float fill) {
  Image out(img.channels(), img.height(), img.width(), fill);
  const float cx = (img.width() - 1) * 0.5f;
  const float cy = (img.height() - 1) * 0.5f;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      float dx = x - cx, dy = y - cy;
      float sx = m[0] * dx + m[1] * dy + cx + tx;
      float sy = m[2] * dx + m[3] * dy + cy + ty;
      int ix = static_cast<int>(std::lround(sx));
      int iy = static_cast<int>(std::lround(sy));
      if (ix < 0 || iy < 0 || ix >= img.width() || iy >= img.height()) continue;
      for (int c = 0; c < img.channels(); ++c) out.at(c, y, x) = img.at(c, iy, ix);
    }
  }
  return out;
}

inline Image equalize(const Image& img) {
  Image out = img;
  const int plane = static_cast<int>(img.plane());
  for (int c = 0; c < img.channels(); ++c) {
    std::array<int, 256> hist{};
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) ++hist[to_byte(img.at(c, y, x))];
    int last = 255;
    while (last > 0 && hist[last] == 0) --last;
    int step = (plane - hist[last]) / 255;
    if (step == 0) continue;
    std::array<int, 256> lut{};
    int n = step / 2;
    for (int i = 0; i < 256; ++i) {
      lut[i] = std::min(255, n / step);
      n += hist[i];
    }
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = lut[to_byte(img.at(c, y, x))] / 255.0f;
  }
  return out;
}

inline Image autocontrast(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels(); ++c) {
    float lo = 1.0f, hi = 0.0f;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        lo = std::min(lo, img.at(c, y, x));
        hi = std::max(hi, img.at(c, y, x));
      }
    if (hi <= lo) continue;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = (img.at(c, y, x) - lo) / (hi - lo);
  }
  return out;
}

inline Image smooth(const Image& img) {
  // 3x3 kernel [[1,1,1],[1,5,1],[1,1,1]] / 13 on the interior, border untouched.
  Image out = img;
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 1; y + 1 < img.height(); ++y)
      for (int x = 1; x + 1 < img.width(); ++x) {
        float s = 4.0f * img.at(c, y, x);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) s += img.at(c, y + dy, x + dx);
        out.at(c, y, x) = s / 13.0f;
      }
  return out;
}

}  // namespace detail

/// Applies one op at magnitude `magnitude` (0..10). `negate` flips the direction of
/// signed ops (geometry and the four enhancement factors).
inline Image apply_op(const Image& img, AugOp op, int magnitude, bool negate, float fill = 0.0f) {
  const float level = static_cast<float>(magnitude) / 10.0f;
  const float sign = negate ? -1.0f : 1.0f;
  switch (op) {
    case AugOp::kIdentity:
      return img;
    case AugOp::kRotate: {
      float rad = sign * 30.0f * level * 3.14159265358979f / 180.0f;
      float c = std::cos(rad), s = std::sin(rad);
      return detail::warp(img, {c, s, -s, c}, 0.0f, 0.0f, fill);
    }
    case AugOp::kShearX:
      return detail::warp(img, {1.0f, sign * 0.3f * level, 0.0f, 1.0f}, 0.0f, 0.0f, fill);
    case AugOp::kShearY:
      return detail::warp(img, {1.0f, 0.0f, sign * 0.3f * level, 1.0f}, 0.0f, 0.0f, fill);
    case AugOp::kTranslateX:
      return detail::warp(img, {1, 0, 0, 1}, sign * (150.0f / 331.0f) * level * img.width(), 0.0f, fill);
    case AugOp::kTranslateY:
      return detail::warp(img, {1, 0, 0, 1}, 0.0f, sign * (150.0f / 331.0f) * level * img.height(), fill);
    case AugOp::kBrightness:
      return detail::blend(Image(img.channels(), img.height(), img.width(), 0.0f), img, 1.0f + sign * 0.9f * level);
    case AugOp::kColor: {
      Image gray(img.channels(), img.height(), img.width());
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
          float l = detail::luminance(img, y, x);
          for (int c = 0; c < img.channels(); ++c) gray.at(c, y, x) = l;
        }
      return detail::blend(gray, img, 1.0f + sign * 0.9f * level);
    }
    case AugOp::kContrast: {
      double mean = 0.0;
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) mean += detail::luminance(img, y, x);
      mean /= static_cast<double>(img.plane());
      return detail::blend(Image(img.channels(), img.height(), img.width(), static_cast<float>(mean)), img,
                           1.0f + sign * 0.9f * level);
    }
    case AugOp::kSharpness:
      return detail::blend(detail::smooth(img), img, 1.0f + sign * 0.9f * level);
    case AugOp::kSolarize: {
      Image out = img;
      // byte levels at or above 256 * (1 - level) are inverted
      const float threshold = 256.0f * (1.0f - level);
      for (float& v : out.data())
        if (static_cast<float>(to_byte(v)) >= threshold) v = 1.0f - v;
      return out;
    }
    case AugOp::kPosterize: {
      const int bits = 8 - static_cast<int>(std::lround(4.0f * level));
      const int mask = ~((1 << (8 - bits)) - 1) & 0xFF;
      Image out = img;
      for (float& v : out.data()) v = static_cast<float>(to_byte(v) & mask) / 255.0f;
      return out;
    }
    case AugOp::kEqualize:
      return detail::equalize(img);
    case AugOp::kAutoContrast:
      return detail::autocontrast(img);
  }
  return img;
}

/// Resize to the working size (when needed), random or center crop, random horizontal flip.
inline ImageSample weak_augment(const ImageSample& sample, const AugmentConfig& cfg, Rng& rng) {
  const Image& in = sample.pixels;
  if (in.height() < cfg.crop_size || in.width() < cfg.crop_size)
    throw InvalidArgument("image " + sample.sample_id + " is " + std::to_string(in.height()) + "x" +
                          std::to_string(in.width()) + ", smaller than crop size " + std::to_string(cfg.crop_size));
  Image work = resize_bilinear(in, cfg.working_size, cfg.working_size);
  const int slack = cfg.working_size - cfg.crop_size;
  int top = slack / 2, left = slack / 2;
  if (!cfg.center_crop) {
    top = static_cast<int>(uniform_index(rng, static_cast<uint64_t>(slack) + 1));
    left = static_cast<int>(uniform_index(rng, static_cast<uint64_t>(slack) + 1));
  }
  Image out = crop(work, top, left, cfg.crop_size, cfg.crop_size);
  if (cfg.flip_prob > 0.0 && bernoulli(rng, cfg.flip_prob)) out = flip_horizontal(out);
  return {sample.sample_id, std::move(out), sample.label};
}

/// Deterministic evaluation preprocessing: resize, center crop, no flip.
inline ImageSample eval_preprocess(const ImageSample& sample, const AugmentConfig& cfg) {
  AugmentConfig c = cfg;
  c.center_crop = true;
  c.flip_prob = 0.0;
  Rng unused(0);
  return weak_augment(sample, c, unused);
}

/// Weak geometry followed by `n_ops` ops drawn with replacement from the policy table.
inline ImageSample strong_augment(const ImageSample& sample, const AugmentPolicy& policy, const AugmentConfig& cfg,
                                  Rng& rng) {
  DTSNL_CHECK(policy.kind == AugmentPolicy::Kind::kStrong, "strong_augment requires a strong policy");
  DTSNL_CHECK(!policy.op_table.empty() || policy.n_ops == 0, "strong policy has an empty op table");
  ImageSample out = weak_augment(sample, cfg, rng);
  for (int i = 0; i < policy.n_ops; ++i) {
    AugOp op = policy.op_table[uniform_index(rng, policy.op_table.size())];
    bool negate = bernoulli(rng, 0.5);
    out.pixels = apply_op(out.pixels, op, policy.magnitude, negate, cfg.fill);
  }
  out.pixels.clamp01();
  return out;
}

struct ViewTriple {
  ImageSample weak1;
  ImageSample weak2;
  ImageSample strong;
  std::string source_id;
};

inline ViewTriple make_views(const ImageSample& sample, const AugmentPolicy& strong_policy, const AugmentConfig& cfg,
                             Rng& rng) {
  ViewTriple v;
  v.weak1 = weak_augment(sample, cfg, rng);
  v.weak2 = weak_augment(sample, cfg, rng);
  v.strong = strong_augment(sample, strong_policy, cfg, rng);
  v.source_id = sample.sample_id;
  return v;
}

/// Per-channel (x - mean) / std applied to network inputs.
struct Normalizer {
  bool enabled = true;
  std::array<float, 3> mean = {0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev = {0.229f, 0.224f, 0.225f};

  /// Writes the normalized planar pixels of `img` into `out` (size C*H*W).
  template <typename T>
  void apply(const Image& img, T* out) const {
    const size_t plane = img.plane();
    const auto& d = img.data();
    for (int c = 0; c < img.channels(); ++c) {
      const float m = enabled ? mean[static_cast<size_t>(c % 3)] : 0.0f;
      const float s = enabled ? stddev[static_cast<size_t>(c % 3)] : 1.0f;
      for (size_t i = 0; i < plane; ++i) out[c * plane + i] = static_cast<T>((d[c * plane + i] - m) / s);
    }
  }
};

}  // namespace dtsnl
