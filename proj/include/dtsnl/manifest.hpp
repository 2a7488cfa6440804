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

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"
#include "dtsnl/image.hpp"

namespace dtsnl {

enum class Split { kLabeled, kUnlabeled, kEval };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kLabeled: return "labeled";
    case Split::kUnlabeled: return "unlabeled";
    case Split::kEval: return "eval";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "labeled") return Split::kLabeled;
  if (s == "unlabeled") return Split::kUnlabeled;
  if (s == "eval") return Split::kEval;
  throw InvalidArgument("unknown split '" + s + "'");
}

struct ManifestRecord {
  std::string path;
  std::optional<ClassIndex> label;
  Split split = Split::kLabeled;

  bool operator==(const ManifestRecord&) const = default;
};

/// Declarative listing of samples and their splits.
///
/// On disk: one JSON object per line, `{"path": ..., "label": <int or null>, "split": ...}`.
/// An optional first line `{"label_space": [names...]}` fixes the class names; without
/// it the default seven-class space is assumed. Relative paths resolve against the
/// manifest's directory.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  DatasetManifest(LabelSpace space, std::vector<ManifestRecord> records, std::filesystem::path root = {})
      : space_(std::move(space)), records_(std::move(records)), root_(std::move(root)) {
    validate();
  }

  const LabelSpace& label_space() const { return space_; }
  const std::vector<ManifestRecord>& records() const { return records_; }
  const std::filesystem::path& root() const { return root_; }

  std::vector<ManifestRecord> split(Split s) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records_)
      if (r.split == s) out.push_back(r);
    return out;
  }

  size_t count(Split s) const {
    size_t n = 0;
    for (const auto& r : records_) n += r.split == s;
    return n;
  }

  std::filesystem::path resolve(const ManifestRecord& r) const {
    std::filesystem::path p(r.path);
    return p.is_absolute() ? p : root_ / p;
  }

  /// Every referenced file exists.
  void check_paths() const {
    for (const auto& r : records_)
      if (!std::filesystem::exists(resolve(r))) throw IoError("manifest path does not resolve: " + r.path);
  }

  ImageSample load(const ManifestRecord& r) const { return {r.path, read_pnm(resolve(r)), r.label}; }

  std::string to_jsonl() const {
    std::ostringstream out;
    out << nlohmann::json{{"label_space", space_.class_names()}}.dump() << "\n";
    for (const auto& r : records_) {
      nlohmann::ordered_json j;
      j["path"] = r.path;
      j["label"] = r.label ? nlohmann::ordered_json(*r.label) : nlohmann::ordered_json(nullptr);
      j["split"] = split_name(r.split);
      out << j.dump() << "\n";
    }
    return out.str();
  }

  void save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + file.string());
    out << to_jsonl();
  }

  static DatasetManifest parse(std::istream& in, std::filesystem::path root) {
    LabelSpace space;
    std::vector<ManifestRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("manifest line " + std::to_string(lineno) + ": " + e.what());
      }
      if (j.contains("label_space")) {
        space = LabelSpace(j["label_space"].get<std::vector<std::string>>());
        continue;
      }
      ManifestRecord r;
      r.path = j.at("path").get<std::string>();
      const auto& lab = j.value("label", nlohmann::json(nullptr));
      if (lab.is_number_integer()) {
        r.label = lab.get<int>();
      } else if (!(lab.is_null() || (lab.is_string() && lab.get<std::string>().empty()))) {
        throw InvalidArgument("manifest line " + std::to_string(lineno) + ": label must be an integer or empty");
      }
      r.split = parse_split(j.at("split").get<std::string>());
      records.push_back(std::move(r));
    }
    return DatasetManifest(std::move(space), std::move(records), std::move(root));
  }

  static DatasetManifest load_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest " + file.string());
    return parse(in, file.parent_path());
  }

 private:
  void validate() const {
    for (const auto& r : records_) {
      if (r.split == Split::kUnlabeled && r.label)
        throw InvalidArgument("unlabeled record carries a label: " + r.path);
      if (r.split != Split::kUnlabeled && !r.label)
        throw InvalidArgument(std::string(split_name(r.split)) + " record has no label: " + r.path);
      if (r.label && !space_.contains(*r.label))
        throw InvalidArgument("label " + std::to_string(*r.label) + " out of range for " + r.path);
    }
  }

  LabelSpace space_;
  std::vector<ManifestRecord> records_;
  std::filesystem::path root_;
};

}  // namespace dtsnl
