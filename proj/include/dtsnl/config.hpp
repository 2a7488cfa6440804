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

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dtsnl/augment.hpp"
#include "dtsnl/dta.hpp"
#include "dtsnl/error.hpp"
#include "dtsnl/losses.hpp"
#include "dtsnl/network.hpp"
#include "dtsnl/snl.hpp"

// Run configuration: a TOML-style file of `[section]` headers and `key = value`
// lines (booleans, numbers, quoted strings, flat arrays). Keys are addressed as
// `section.key`; `--set section.key=value` overrides are applied on top.

namespace dtsnl {

namespace config_detail {

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Removes a trailing `# comment` that is not inside a quoted string.
inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

/// Parses a TOML scalar or flat array. Returns false on malformed input.
inline bool parse_literal(const std::string& text, nlohmann::json& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  if (t == "true" || t == "false") {
    out = t == "true";
    return true;
  }
  if (t.front() == '"' || t.front() == '[') {
    try {
      out = nlohmann::json::parse(t);
      return out.is_string() || out.is_array();
    } catch (const nlohmann::json::exception&) {
      return false;
    }
  }
  std::string num;
  for (char ch : t)
    if (ch != '_') num += ch;
  try {
    size_t used = 0;
    if (num.find_first_of(".eE") == std::string::npos || num.find_first_of("xX") != std::string::npos) {
      long long v = std::stoll(num, &used, 0);
      if (used == num.size()) {
        out = v;
        return true;
      }
    }
    double d = std::stod(num, &used);
    if (used == num.size()) {
      out = d;
      return true;
    }
  } catch (const std::exception&) {
  }
  return false;
}

inline std::string format_literal(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

}  // namespace config_detail

/// Raw key/value view of a config file plus overrides, before type resolution.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in, const std::string& origin = "<config>") {
    ConfigFile cfg;
    std::string line, section;
    int lineno = 0;
    std::vector<std::string> errors;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = config_detail::trim(config_detail::strip_comment(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') {
          errors.push_back(origin + ":" + std::to_string(lineno) + ": unterminated section header");
          continue;
        }
        section = config_detail::trim(t.substr(1, t.size() - 2));
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos) {
        errors.push_back(origin + ":" + std::to_string(lineno) + ": expected key = value");
        continue;
      }
      std::string key = config_detail::trim(t.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      nlohmann::json v;
      if (!config_detail::parse_literal(t.substr(eq + 1), v)) {
        errors.push_back(origin + ":" + std::to_string(lineno) + ": cannot parse value for '" + key + "'");
        continue;
      }
      cfg.values_[key] = v;
    }
    if (!errors.empty()) throw ConfigError(join(errors));
    return cfg;
  }

  static ConfigFile parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static ConfigFile load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config " + file.string());
    return parse(in, file.string());
  }

  /// Applies `key=value`. Unparseable values are taken as bare strings.
  void set(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = config_detail::trim(assignment.substr(0, eq));
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json v;
    if (!config_detail::parse_literal(text, v)) v = config_detail::trim(text);
    values_[key] = v;
  }

  void set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }

  const std::map<std::string, nlohmann::json>& values() const { return values_; }

  /// Splits off the keys under `section.`; returns {inside, outside}.
  std::pair<ConfigFile, ConfigFile> split(const std::string& section) const {
    std::pair<ConfigFile, ConfigFile> out;
    for (const auto& [key, v] : values_)
      (key.rfind(section + ".", 0) == 0 ? out.first : out.second).values_[key] = v;
    return out;
  }

  static std::string join(const std::vector<std::string>& errors) {
    std::string msg = std::to_string(errors.size()) + " configuration error(s):";
    for (const auto& e : errors) msg += "\n  " + e;
    return msg;
  }

 private:
  std::map<std::string, nlohmann::json> values_;
};

/// Everything a training run needs, fully typed. Defaults match the committed base config.
struct RunConfig {
  // train
  int epochs = 30;
  int batch_size = 128;
  double labeled_fraction = 0.5;
  double learning_rate = 0.0005;
  uint64_t seed = 0;
  int eval_every = 1;
  std::string eval_model = "student";
  int checkpoint_every = 1;
  bool trace = false;
  // data
  std::string manifest;
  bool normalize = true;
  AugmentConfig augment{64, 56, 0.5, false, 0.0f};
  // strong
  int strong_n_ops = 3;
  int strong_magnitude = 5;
  std::vector<std::string> strong_op_subset;
  // modules
  ModelConfig model;
  DtaConfig dta;
  SnlConfig snl;
  LossWeights loss;

  int labeled_batch() const {
    return std::clamp(static_cast<int>(std::lround(batch_size * labeled_fraction)), 1, batch_size - 1);
  }
  int unlabeled_batch() const { return batch_size - labeled_batch(); }

  AugmentPolicy strong_policy() const { return AugmentPolicy::strong(strong_n_ops, strong_magnitude, strong_op_subset); }

  /// Resolves a raw config against the defaults. Every problem is collected
  /// and reported in a single ConfigError.
  static RunConfig resolve(const ConfigFile& file);

  /// The resolved configuration as `section.key = value` lines (parseable by ConfigFile).
  std::string snapshot() const;
};

namespace config_detail {

struct Field {
  std::function<void(RunConfig&, const nlohmann::json&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

struct TypeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int64_t as_int(const nlohmann::json& v) {
  if (!v.is_number_integer()) throw TypeError("expected an integer, got " + v.dump());
  return v.get<int64_t>();
}
inline double as_double(const nlohmann::json& v) {
  if (!v.is_number()) throw TypeError("expected a number, got " + v.dump());
  return v.get<double>();
}
inline bool as_bool(const nlohmann::json& v) {
  if (!v.is_boolean()) throw TypeError("expected true or false, got " + v.dump());
  return v.get<bool>();
}
inline std::string as_string(const nlohmann::json& v) {
  if (!v.is_string()) throw TypeError("expected a string, got " + v.dump());
  return v.get<std::string>();
}
inline std::vector<std::string> as_string_list(const nlohmann::json& v) {
  if (v.is_string()) {
    // comma-separated shorthand for --set
    std::vector<std::string> out;
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ','))
      if (!trim(item).empty()) out.push_back(trim(item));
    return out;
  }
  if (!v.is_array()) throw TypeError("expected an array of strings, got " + v.dump());
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(as_string(e));
  return out;
}
inline std::vector<int> as_int_list(const nlohmann::json& v) {
  if (!v.is_array()) throw TypeError("expected an array of integers, got " + v.dump());
  std::vector<int> out;
  for (const auto& e : v) out.push_back(static_cast<int>(as_int(e)));
  return out;
}

#define DTSNL_FIELD(key, member, conv)                                                        \
  {                                                                                           \
    key, Field {                                                                              \
      [](RunConfig& c, const nlohmann::json& v) { c.member = static_cast<decltype(c.member)>(conv(v)); }, \
          [](const RunConfig& c) { return nlohmann::json(c.member); }                         \
    }                                                                                         \
  }

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      DTSNL_FIELD("train.epochs", epochs, as_int),
      DTSNL_FIELD("train.batch_size", batch_size, as_int),
      DTSNL_FIELD("train.labeled_fraction", labeled_fraction, as_double),
      DTSNL_FIELD("train.learning_rate", learning_rate, as_double),
      DTSNL_FIELD("train.seed", seed, as_int),
      DTSNL_FIELD("train.eval_every", eval_every, as_int),
      DTSNL_FIELD("train.eval_model", eval_model, as_string),
      DTSNL_FIELD("train.checkpoint_every", checkpoint_every, as_int),
      DTSNL_FIELD("train.trace", trace, as_bool),
      DTSNL_FIELD("data.manifest", manifest, as_string),
      DTSNL_FIELD("data.normalize", normalize, as_bool),
      DTSNL_FIELD("data.working_size", augment.working_size, as_int),
      DTSNL_FIELD("data.crop_size", augment.crop_size, as_int),
      DTSNL_FIELD("weak.flip_prob", augment.flip_prob, as_double),
      DTSNL_FIELD("strong.n_ops", strong_n_ops, as_int),
      DTSNL_FIELD("strong.magnitude", strong_magnitude, as_int),
      DTSNL_FIELD("strong.op_subset", strong_op_subset, as_string_list),
      DTSNL_FIELD("model.channels", model.channels, as_int_list),
      DTSNL_FIELD("attention.enabled", model.attention.enabled, as_bool),
      DTSNL_FIELD("attention.num_branches", model.attention.num_branches, as_int),
      DTSNL_FIELD("attention.reduction", model.attention.reduction, as_int),
      DTSNL_FIELD("attention.drop_p", model.attention.drop_p, as_double),
      DTSNL_FIELD("dta.enabled", dta.enabled, as_bool),
      DTSNL_FIELD("dta.mu", dta.mu, as_double),
      DTSNL_FIELD("dta.tau_init", dta.tau_init, as_double),
      DTSNL_FIELD("dta.ema_decay", dta.ema_decay, as_double),
      DTSNL_FIELD("dta.full_pass_stats", dta.full_pass_stats, as_bool),
      DTSNL_FIELD("snl.enabled", snl.enabled, as_bool),
      DTSNL_FIELD("snl.delta", snl.delta, as_double),
      DTSNL_FIELD("snl.log_form", snl.log_form, as_bool),
      DTSNL_FIELD("loss.lambda1", loss.lambda1, as_double),
      DTSNL_FIELD("loss.lambda2", loss.lambda2, as_double),
  };
  return table;
}

#undef DTSNL_FIELD

}  // namespace config_detail

inline RunConfig RunConfig::resolve(const ConfigFile& file) {
  RunConfig c;
  std::vector<std::string> errors;
  const auto& table = config_detail::fields();
  for (const auto& [key, value] : file.values()) {
    auto it = table.find(key);
    if (it == table.end()) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      it->second.set(c, value);
    } catch (const std::exception& e) {
      errors.push_back("'" + key + "': " + e.what());
    }
  }
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  require(c.epochs >= 1, "'train.epochs' must be >= 1");
  require(c.batch_size >= 2, "'train.batch_size' must be >= 2");
  require(c.labeled_fraction > 0.0 && c.labeled_fraction < 1.0, "'train.labeled_fraction' must be in (0,1)");
  require(c.learning_rate > 0.0, "'train.learning_rate' must be > 0");
  require(c.eval_every >= 1, "'train.eval_every' must be >= 1");
  require(c.checkpoint_every >= 1, "'train.checkpoint_every' must be >= 1");
  require(c.eval_model == "student" || c.eval_model == "teacher", "'train.eval_model' must be student or teacher");
  require(c.augment.crop_size >= 1 && c.augment.working_size >= c.augment.crop_size,
          "'data.working_size' must be >= 'data.crop_size' >= 1");
  require(c.augment.flip_prob >= 0.0 && c.augment.flip_prob <= 1.0, "'weak.flip_prob' must be in [0,1]");
  require(c.strong_n_ops >= 0, "'strong.n_ops' must be >= 0");
  require(c.strong_magnitude >= 0 && c.strong_magnitude <= 10, "'strong.magnitude' must be in [0,10]");
  for (const auto& name : c.strong_op_subset) {
    try {
      parse_aug_op(name);
    } catch (const InvalidArgument& e) {
      errors.push_back(std::string("'strong.op_subset': ") + e.what());
    }
  }
  require(!c.model.channels.empty(), "'model.channels' must not be empty");
  for (int ch : c.model.channels) require(ch >= 1, "'model.channels' entries must be >= 1");
  require(c.model.attention.num_branches >= 1, "'attention.num_branches' must be >= 1");
  require(c.model.attention.reduction >= 1, "'attention.reduction' must be >= 1");
  require(c.model.attention.drop_p >= 0.0 && c.model.attention.drop_p <= 1.0, "'attention.drop_p' must be in [0,1]");
  require(c.dta.mu >= 0.0 && c.dta.mu <= 1.0, "'dta.mu' must be in [0,1]");
  require(c.dta.tau_init >= 0.0 && c.dta.tau_init <= 1.0, "'dta.tau_init' must be in [0,1]");
  require(c.dta.ema_decay >= 0.0 && c.dta.ema_decay <= 1.0, "'dta.ema_decay' must be in [0,1]");
  require(c.snl.delta >= 0.0 && c.snl.delta < 1.0, "'snl.delta' must be in [0,1)");
  require(std::isfinite(c.loss.lambda1) && c.loss.lambda1 >= 0.0, "'loss.lambda1' must be finite and >= 0");
  require(std::isfinite(c.loss.lambda2) && c.loss.lambda2 >= 0.0, "'loss.lambda2' must be finite and >= 0");
  if (!errors.empty()) throw ConfigError(ConfigFile::join(errors));
  return c;
}

inline std::string RunConfig::snapshot() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, field] : config_detail::fields()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << config_detail::format_literal(field.get(*this)) << "\n";
  }
  return out.str();
}

}  // namespace dtsnl
