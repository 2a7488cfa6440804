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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtsnl/error.hpp"

namespace dtsnl::io {

inline constexpr uint32_t kBlobMagic = 0x44545342;  // "DTSB"

/// Raw little-endian float buffer with a magic word and element count.
inline void write_floats(const std::filesystem::path& file, const std::vector<float>& v) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  const uint32_t magic = kBlobMagic;
  const uint64_t n = v.size();
  out.write(reinterpret_cast<const char*>(&magic), sizeof magic);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!out) throw IoError("short write to " + file.string());
}

inline std::vector<float> read_floats(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  uint32_t magic = 0;
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof magic);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || magic != kBlobMagic) throw IoError("not a parameter blob: " + file.string());
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw IoError("truncated parameter blob: " + file.string());
  return v;
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("short write to " + file.string());
}

inline std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json(const std::filesystem::path& file) {
  try {
    return nlohmann::json::parse(read_text(file));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

/// Append-only line-delimited JSON stream. Lines are also kept in memory.
class JsonLines {
 public:
  JsonLines() = default;
  explicit JsonLines(const std::filesystem::path& file) : out_(file, std::ios::binary | std::ios::app) {
    if (!out_) throw IoError("cannot open " + file.string());
  }

  void write(const nlohmann::ordered_json& record) {
    std::string line = record.dump();
    if (out_.is_open()) {
      out_ << line << '\n';
      out_.flush();
    }
    lines_.push_back(std::move(line));
  }

  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::ofstream out_;
  std::vector<std::string> lines_;
};

}  // namespace dtsnl::io
