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

#include "cds/io.h"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace cds::io {
namespace {

std::string FormatCell(const scg::Variable& v, double x) {
  char buf[40];
  if (v.IsDiscrete()) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(x)));
  } else {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
  }
  return buf;
}

std::vector<std::string> SplitLine(const std::string& line, size_t line_no) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',') {
      out.emplace_back();
    } else if (c == '"') {
      throw ParseError(line_no, out.size(), "quoted fields are not supported");
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

ParseError::ParseError(size_t line, size_t column, const std::string& message)
    : Error(ErrorCode::kParseError,
            "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

std::string DatasetToCsv(const scg::Dataset& data) {
  std::string out;
  for (size_t c = 0; c < data.cols(); ++c) {
    if (c) out += ',';
    out += data.schema[c].name;
  }
  out += '\n';
  for (size_t r = 0; r < data.rows; ++r) {
    for (size_t c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      if (data.observed(r, c)) out += FormatCell(data.schema[c], data.raw(r, c));
    }
    out += '\n';
  }
  return out;
}

scg::Dataset DatasetFromCsv(const std::string& text, const std::vector<scg::Variable>& schema) {
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, 1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = SplitLine(line, line_no);
  if (header.size() != schema.size()) {
    throw Error(ErrorCode::kSchemaViolation, "header has " + std::to_string(header.size()) +
                                                 " columns, schema has " +
                                                 std::to_string(schema.size()));
  }
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] != schema[c].name) {
      throw Error(ErrorCode::kSchemaViolation, "header column " + std::to_string(c + 1) + " is '" +
                                                   header[c] + "', schema expects '" +
                                                   schema[c].name + "'");
    }
  }
  scg::Dataset data = scg::Dataset::Empty(schema);
  std::vector<double> row(schema.size());
  std::vector<uint8_t> mask(schema.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = SplitLine(line, line_no);
    if (fields.size() != schema.size()) {
      throw ParseError(line_no, std::min(fields.size(), schema.size()) + 1,
                       "expected " + std::to_string(schema.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    for (size_t c = 0; c < fields.size(); ++c) {
      const scg::Variable& v = schema[c];
      if (fields[c].empty()) {
        mask[c] = 0;
        row[c] = v.IsDiscrete() ? scg::kDiscreteSentinel : std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const char* begin = fields[c].c_str();
      char* end = nullptr;
      errno = 0;
      const double x = std::strtod(begin, &end);
      if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
        throw ParseError(line_no, c + 1, "'" + fields[c] + "' is not a finite number");
      }
      if (v.IsDiscrete()) {
        if (x != std::floor(x) || x < 0 || x >= v.Levels()) {
          throw Error(ErrorCode::kSchemaViolation,
                      "line " + std::to_string(line_no) + ", column '" + v.name + "': level '" +
                          fields[c] + "' outside [0, " + std::to_string(v.Levels()) + ")");
        }
      }
      mask[c] = 1;
      row[c] = x;
    }
    data.AppendRow(row, mask);
  }
  return data;
}

std::string SchemaPathFor(const std::string& csv_path) { return csv_path + ".schema.json"; }

void SaveDataset(const std::string& path, const scg::Dataset& data) {
  WriteFile(path, DatasetToCsv(data));
  WriteJson(SchemaPathFor(path), scg::SchemaToJson(data.schema));
}

scg::Dataset LoadDataset(const std::string& path, const std::vector<scg::Variable>& schema) {
  return DatasetFromCsv(ReadFile(path), schema);
}

scg::Dataset LoadDataset(const std::string& path) {
  return LoadDataset(path, scg::SchemaFromJson(ReadJson(SchemaPathFor(path))));
}

std::string Hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string DatasetHash(const scg::Dataset& data) { return Hex64(Fnv1a64(DatasetToCsv(data))); }

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) MakeDirs(p.parent_path().string());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + tmp + "'");
    out << content;
    if (!out.flush()) throw Error(ErrorCode::kIoError, "short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot rename '" + tmp + "': " + ec.message());
}

nlohmann::json ReadJson(const std::string& path) {
  const std::string text = ReadFile(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

void WriteJson(const std::string& path, const nlohmann::json& j) { WriteFile(path, j.dump(2) + "\n"); }

void MakeDirs(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + path + "': " + ec.message());
}

}  // namespace cds::io
