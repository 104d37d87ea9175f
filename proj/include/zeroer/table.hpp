// Copyright 2026 The ZeroER Authors.
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

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace zeroer {

using Cell = std::optional<std::string>;
using Record = std::vector<Cell>;

/// An immutable relation loaded from a delimited file.
///
/// Every record has exactly one slot per attribute; empty cells and the
/// literals "NULL"/"null" are stored as std::nullopt. Non-id values are
/// trimmed and ASCII case-folded at load, id values are only trimmed.
class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<std::string> attributes, std::string id_column,
        std::vector<Record> records);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& attributes() const { return attributes_; }
  const std::string& id_column() const { return id_column_; }
  std::size_t id_index() const { return id_index_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }
  const Record& record(std::size_t row) const { return records_[row]; }

  const std::string& id(std::size_t row) const { return *records_[row][id_index_]; }
  std::optional<std::size_t> find(std::string_view id) const;
  std::optional<std::size_t> column(std::string_view attribute) const;
  const Cell& value(std::size_t row, std::size_t col) const { return records_[row][col]; }

 private:
  std::string name_;
  std::vector<std::string> attributes_;
  std::string id_column_;
  std::size_t id_index_ = 0;
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> id_lookup_;
};

// Splits delimited text into rows honoring double-quote escaping (quoted
// fields may contain delimiters, doubled quotes and newlines). The second
// member of each row is the 1-based line number the row starts on.
std::vector<std::pair<std::vector<std::string>, std::size_t>> read_delimited(std::istream& in,
                                                                             char delimiter);

Table parse_table(std::istream& in, std::string name, const std::string& id_column,
                  char delimiter = ',');
Table load_table(const std::string& path, const std::string& id_column, char delimiter = ',');

// Writes the table back in delimited form; nulls become empty cells.
void write_table(std::ostream& out, const Table& table, char delimiter = ',');

std::string normalize_text(std::string_view raw);

enum class AttributeType { short_string, long_string, numeric, categorical };

std::string_view to_string(AttributeType type);
AttributeType attribute_type_from_string(std::string_view name);

struct AlignedAttribute {
  std::string left;
  std::string right;
  AttributeType type = AttributeType::short_string;
};

struct AlignedSchema {
  std::vector<AlignedAttribute> pairs;
};

struct TypeInferenceConfig {
  double numeric_fraction = 0.95;
  double long_string_tokens = 6.0;
  double categorical_ratio = 0.05;
};

// Type tag for a column given its non-null values.
AttributeType infer_attribute_type(const std::vector<std::string_view>& values,
                                   const TypeInferenceConfig& config = {});

/// Pairs attributes by exact name (id columns excluded) and applies the
/// optional (left, right) hints on top. Throws ParseError when nothing aligns.
AlignedSchema align_schemas(const Table& left, const Table& right,
                            const std::vector<std::pair<std::string, std::string>>& hints = {},
                            const TypeInferenceConfig& config = {});

}  // namespace zeroer
