// include/gdistill/config_file.h

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

#ifndef GDISTILL_CONFIG_FILE_H_
#define GDISTILL_CONFIG_FILE_H_

// Run configuration as a plain text file: `key = value` lines grouped under
// `[section]` headers, one section per module. `#` and `;` start comments.
// Sections and keys keep their file order, so Serialize() round-trips a
// parsed file up to comments and whitespace. Duplicate sections or keys are
// rejected rather than silently merged; a typo should fail loudly.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gdistill/common.h"

namespace gdistill {

class ConfigFile {
 public:
  ConfigFile() = default;

  // Parse errors name the line number. `origin` labels error messages
  // (usually the file path).
  static ConfigFile Parse(const std::string &text,
                          const std::string &origin = "<string>");
  static ConfigFile Load(const std::string &path);

  std::string Serialize() const;
  void Save(const std::string &path) const;

  bool Has(const std::string &section, const std::string &key) const;

  // Missing section or key throws ConfigError naming both.
  std::string Get(const std::string &section, const std::string &key) const;
  std::string GetOr(const std::string &section, const std::string &key,
                    const std::string &fallback) const;
  int64_t GetInt(const std::string &section, const std::string &key,
                 int64_t fallback) const;
  double GetDouble(const std::string &section, const std::string &key,
                   double fallback) const;
  bool GetBool(const std::string &section, const std::string &key,
               bool fallback) const;

  // Creates the section on first use; setting an existing key overwrites it.
  void Set(const std::string &section, const std::string &key,
           const std::string &value);

  std::vector<std::string> SectionNames() const;
  bool HasSection(const std::string &section) const;

  // Keys of a section in file order; empty for a missing section.
  std::vector<std::pair<std::string, std::string>> Items(
      const std::string &section) const;

  // Throws ConfigError listing every key in `section` that is not in
  // `allowed`. Catches misspelled options before a run silently ignores
  // them. A missing section passes (all its keys default).
  void ExpectKeys(const std::string &section,
                  const std::vector<std::string> &allowed) const;

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> items;
  };

  const Section *FindSection(const std::string &name) const;
  Section *FindSection(const std::string &name);

  std::vector<Section> sections_;
  std::string origin_ = "<config>";
};

}  // namespace gdistill

#endif  // GDISTILL_CONFIG_FILE_H_
