// src/config_file.cc

// Copyright 2026  gdistill authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "gdistill/config_file.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gdistill {

namespace {

std::string Trim(const std::string &s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::Parse(const std::string &text,
                             const std::string &origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  Section *current = nullptr;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = Trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(Cat(origin, ":", lineno,
                              ": section header missing closing ']'"));
      const std::string name = Trim(line.substr(1, line.size() - 2));
      if (name.empty())
        throw ConfigError(Cat(origin, ":", lineno, ": empty section name"));
      if (cfg.FindSection(name) != nullptr)
        throw ConfigError(Cat(origin, ":", lineno, ": duplicate section [",
                              name, "]"));
      cfg.sections_.push_back({name, {}});
      current = &cfg.sections_.back();
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(Cat(origin, ":", lineno,
                            ": expected 'key = value', got '", line, "'"));
    if (current == nullptr)
      throw ConfigError(Cat(origin, ":", lineno,
                            ": key outside any [section]"));
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(Cat(origin, ":", lineno, ": empty key"));
    for (const auto &[k, v] : current->items)
      if (k == key)
        throw ConfigError(Cat(origin, ":", lineno, ": duplicate key '", key,
                              "' in [", current->name, "]"));
    current->items.emplace_back(key, value);
  }
  return cfg;
}

ConfigFile ConfigFile::Load(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError(Cat("cannot open config file '", path, "'"));
  std::stringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str(), path);
}

std::string ConfigFile::Serialize() const {
  std::string out;
  for (size_t i = 0; i < sections_.size(); ++i) {
    if (i) out += "\n";
    out += "[" + sections_[i].name + "]\n";
    for (const auto &[k, v] : sections_[i].items)
      out += k + " = " + v + "\n";
  }
  return out;
}

void ConfigFile::Save(const std::string &path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(Cat("cannot open '", path, "' for writing"));
  f << Serialize();
  if (!f) throw DataError(Cat("short write to '", path, "'"));
}

const ConfigFile::Section *ConfigFile::FindSection(
    const std::string &name) const {
  for (const Section &s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

ConfigFile::Section *ConfigFile::FindSection(const std::string &name) {
  for (Section &s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

bool ConfigFile::Has(const std::string &section, const std::string &key) const {
  const Section *s = FindSection(section);
  if (s == nullptr) return false;
  for (const auto &[k, v] : s->items)
    if (k == key) return true;
  return false;
}

std::string ConfigFile::Get(const std::string &section,
                            const std::string &key) const {
  const Section *s = FindSection(section);
  if (s != nullptr)
    for (const auto &[k, v] : s->items)
      if (k == key) return v;
  throw ConfigError(Cat(origin_, ": missing required key '", key, "' in [",
                        section, "]"));
}

std::string ConfigFile::GetOr(const std::string &section,
                              const std::string &key,
                              const std::string &fallback) const {
  return Has(section, key) ? Get(section, key) : fallback;
}

int64_t ConfigFile::GetInt(const std::string &section, const std::string &key,
                           int64_t fallback) const {
  if (!Has(section, key)) return fallback;
  const std::string v = Get(section, key);
  char *end = nullptr;
  const long long parsed = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(Cat(origin_, ": [", section, "] ", key, " = '", v,
                          "' is not an integer"));
  return parsed;
}

double ConfigFile::GetDouble(const std::string &section,
                             const std::string &key, double fallback) const {
  if (!Has(section, key)) return fallback;
  const std::string v = Get(section, key);
  char *end = nullptr;
  const double parsed = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(Cat(origin_, ": [", section, "] ", key, " = '", v,
                          "' is not a number"));
  return parsed;
}

bool ConfigFile::GetBool(const std::string &section, const std::string &key,
                         bool fallback) const {
  if (!Has(section, key)) return fallback;
  std::string v = Get(section, key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(Cat(origin_, ": [", section, "] ", key, " = '", v,
                        "' is not a boolean"));
}

void ConfigFile::Set(const std::string &section, const std::string &key,
                     const std::string &value) {
  Section *s = FindSection(section);
  if (s == nullptr) {
    sections_.push_back({section, {}});
    s = &sections_.back();
  }
  for (auto &[k, v] : s->items)
    if (k == key) {
      v = value;
      return;
    }
  s->items.emplace_back(key, value);
}

std::vector<std::string> ConfigFile::SectionNames() const {
  std::vector<std::string> names;
  for (const Section &s : sections_) names.push_back(s.name);
  return names;
}

bool ConfigFile::HasSection(const std::string &section) const {
  return FindSection(section) != nullptr;
}

std::vector<std::pair<std::string, std::string>> ConfigFile::Items(
    const std::string &section) const {
  const Section *s = FindSection(section);
  return s == nullptr ? std::vector<std::pair<std::string, std::string>>()
                      : s->items;
}

void ConfigFile::ExpectKeys(const std::string &section,
                            const std::vector<std::string> &allowed) const {
  const Section *s = FindSection(section);
  if (s == nullptr) return;
  std::string strays;
  for (const auto &[k, v] : s->items)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      strays += strays.empty() ? k : ", " + k;
  if (!strays.empty())
    throw ConfigError(Cat(origin_, ": unknown key(s) in [", section, "]: ",
                          strays));
}

}  // namespace gdistill
