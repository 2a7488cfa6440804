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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"

namespace dtsnl {

/// Planar (channel-major) float image with values in [0,1].
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, float fill = 0.0f)
      : channels_(channels), height_(height), width_(width),
        data_(static_cast<size_t>(channels) * height * width, fill) {
    DTSNL_CHECK(channels > 0 && height > 0 && width > 0, "image dimensions must be positive");
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  size_t plane() const { return static_cast<size_t>(height_) * width_; }

  float& at(int c, int y, int x) { return data_[(static_cast<size_t>(c) * height_ + y) * width_ + x]; }
  float at(int c, int y, int x) const { return data_[(static_cast<size_t>(c) * height_ + y) * width_ + x]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const Image& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  void clamp01() {
    for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
  }

  bool finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  bool operator==(const Image&) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// An image together with its identity and optional ground-truth class.
struct ImageSample {
  std::string sample_id;
  Image pixels;
  std::optional<ClassIndex> label;
};

/// Bilinear resize with half-pixel centers.
inline Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (src.height() == out_h && src.width() == out_w) return src;
  Image dst(src.channels(), out_h, out_w);
  const float sy = static_cast<float>(src.height()) / out_h;
  const float sx = static_cast<float>(src.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    float fy = std::max(0.0f, (y + 0.5f) * sy - 0.5f);
    int y0 = std::min(static_cast<int>(fy), src.height() - 1);
    int y1 = std::min(y0 + 1, src.height() - 1);
    float wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      float fx = std::max(0.0f, (x + 0.5f) * sx - 0.5f);
      int x0 = std::min(static_cast<int>(fx), src.width() - 1);
      int x1 = std::min(x0 + 1, src.width() - 1);
      float wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        float top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        float bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        dst.at(c, y, x) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return dst;
}

inline Image crop(const Image& src, int top, int left, int h, int w) {
  DTSNL_CHECK(top >= 0 && left >= 0 && top + h <= src.height() && left + w <= src.width(),
              "crop window outside image");
  Image dst(src.channels(), h, w);
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) dst.at(c, y, x) = src.at(c, top + y, left + x);
  return dst;
}

inline Image flip_horizontal(const Image& src) {
  Image dst(src.channels(), src.height(), src.width());
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) dst.at(c, y, x) = src.at(c, y, src.width() - 1 - x);
  return dst;
}

inline uint8_t to_byte(float v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// Binary PPM (P6, 3 channels) or PGM (P5, 1 channel), 8 bits per sample.
inline void write_pnm(const std::filesystem::path& path, const Image& img) {
  DTSNL_CHECK(img.channels() == 1 || img.channels() == 3, "PNM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << (img.channels() == 3 ? "P6" : "P5") << "\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<uint8_t> buf(img.data().size());
  size_t k = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) buf[k++] = to_byte(img.at(c, y, x));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::string magic;
  in >> magic;
  int channels = magic == "P6" ? 3 : magic == "P5" ? 1 : 0;
  if (channels == 0) throw IoError("unsupported image format in " + path.string());
  auto next_int = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
    int v = 0;
    in >> v;
    return v;
  };
  int w = next_int();
  int h = next_int();
  int maxval = next_int();
  in.get();
  if (!in || w <= 0 || h <= 0 || maxval != 255) throw IoError("bad image header in " + path.string());
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw IoError("truncated image " + path.string());
  Image img(channels, h, w);
  size_t k = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) img.at(c, y, x) = buf[k++] / 255.0f;
  return img;
}

}  // namespace dtsnl
