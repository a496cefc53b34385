// Copyright 2026 The lanekeep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lanekeep/errors.hpp"

namespace lanekeep {

/// Flat key/value configuration in a TOML-like subset:
///
///   # comment
///   key = 1.5
///   [section]
///   name = "text"      # stored as section.name
///
/// Values are numbers, booleans, or double-quoted strings. Later keys
/// override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value);

  std::optional<std::string> get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Section names in order of first appearance.
  const std::vector<std::string>& sections() const { return sections_; }
  /// Keys directly inside `section` (without the prefix), sorted.
  std::vector<std::string> keys_in(const std::string& section) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::vector<std::string> sections_;

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;
};

}  // namespace lanekeep
