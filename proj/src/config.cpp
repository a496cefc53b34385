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

#include "lanekeep/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace lanekeep {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '-' || c == '.';
  });
}

// Strips a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::string section;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    ++line_no;
    const std::string_view line = trim(strip_comment(text.substr(start, end - start)));
    start = end + 1;
    auto fail_line = [&](const std::string& msg) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + msg);
    };
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail_line("unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!valid_key(section)) fail_line("bad section name");
      if (std::find(cfg.sections_.begin(), cfg.sections_.end(), section) ==
          cfg.sections_.end()) {
        cfg.sections_.push_back(section);
      }
    } else {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) fail_line("expected key = value");
      const std::string_view key = trim(line.substr(0, eq));
      std::string_view value = trim(line.substr(eq + 1));
      if (!valid_key(key)) fail_line("bad key '" + std::string(key) + "'");
      if (value.empty()) fail_line("missing value for '" + std::string(key) + "'");
      std::string stored;
      if (value.front() == '"') {
        if (value.size() < 2 || value.back() != '"') {
          fail_line("unterminated string");
        }
        stored = std::string(value.substr(1, value.size() - 2));
      } else {
        stored = std::string(value);
      }
      const std::string full =
          section.empty() ? std::string(key) : section + "." + std::string(key);
      cfg.values_[full] = stored;
      cfg.lines_[full] = line_no;
    }
    if (end == text.size()) break;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void KeyValueConfig::set(const std::string& key, std::string value) {
  values_[key] = std::move(value);
}

void KeyValueConfig::fail(const std::string& key, const std::string& msg) const {
  const auto it = lines_.find(key);
  const std::string where =
      it == lines_.end() ? "" : "line " + std::to_string(it->second) + ": ";
  throw ConfigError(where + key + ": " + msg);
}

std::optional<std::string> KeyValueConfig::get_string(
    const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  return get_string(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key,
                                  double fallback) const {
  const auto v = get_string(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) {
    fail(key, "expected a number, got '" + *v + "'");
  }
  return out;
}

std::int64_t KeyValueConfig::get_int(const std::string& key,
                                     std::int64_t fallback) const {
  const auto v = get_string(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) {
    fail(key, "expected an integer, got '" + *v + "'");
  }
  return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get_string(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "on") return true;
  if (*v == "false" || *v == "off") return false;
  fail(key, "expected true/false, got '" + *v + "'");
}

std::vector<std::string> KeyValueConfig::keys_in(
    const std::string& section) const {
  std::vector<std::string> out;
  const std::string prefix = section + ".";
  for (const auto& [key, value] : values_) {
    if (key.rfind(prefix, 0) == 0 &&
        key.find('.', prefix.size()) == std::string::npos) {
      out.push_back(key.substr(prefix.size()));
    }
  }
  return out;
}

}  // namespace lanekeep
