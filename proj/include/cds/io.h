/*
 * Copyright 2026 The causal-dp-synth Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dataset CSV encoding and small filesystem helpers.
//
// A dataset is a header of variable names followed by one line per row.
// Discrete cells are integer levels, continuous cells use 17 significant
// digits (so values round-trip bitwise) and hidden cells are empty.

#ifndef CDS_IO_H_
#define CDS_IO_H_

#include <cstddef>
#include <string>
#include <vector>

#include "cds/common.h"
#include "cds/scg.h"
#include "json.hpp"

namespace cds::io {

class ParseError : public Error {
 public:
  ParseError(size_t line, size_t column, const std::string& message);
  size_t line() const { return line_; }
  size_t column() const { return column_; }

 private:
  size_t line_, column_;
};

std::string DatasetToCsv(const scg::Dataset& data);
// Throws ParseError (1-based line and column) for malformed text and
// kSchemaViolation for well-formed cells the schema rejects.
scg::Dataset DatasetFromCsv(const std::string& text, const std::vector<scg::Variable>& schema);

// The schema travels in a JSON sidecar next to the CSV.
std::string SchemaPathFor(const std::string& csv_path);
void SaveDataset(const std::string& path, const scg::Dataset& data);
scg::Dataset LoadDataset(const std::string& path, const std::vector<scg::Variable>& schema);
scg::Dataset LoadDataset(const std::string& path);  // schema from the sidecar

// FNV-1a of the CSV encoding, as 16 hex digits.
std::string DatasetHash(const scg::Dataset& data);
std::string Hex64(uint64_t v);

std::string ReadFile(const std::string& path);
// Writes to a sibling temporary and renames it into place.
void WriteFile(const std::string& path, const std::string& content);
nlohmann::json ReadJson(const std::string& path);
void WriteJson(const std::string& path, const nlohmann::json& j);
void MakeDirs(const std::string& path);

}  // namespace cds::io

#endif  // CDS_IO_H_
