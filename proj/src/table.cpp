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

#include "zeroer/table.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "zeroer/error.hpp"

namespace zeroer {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_null_literal(std::string_view s) { return s.empty() || s == "NULL" || s == "null"; }

bool parses_as_number(std::string_view s) {
  if (s.empty()) return false;
  std::string buf(s);
  char* end = nullptr;
  std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size();
}

std::size_t count_tokens(std::string_view s) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : s) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string out(trim(raw));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Table::Table(std::string name, std::vector<std::string> attributes, std::string id_column,
             std::vector<Record> records)
    : name_(std::move(name)),
      attributes_(std::move(attributes)),
      id_column_(std::move(id_column)),
      records_(std::move(records)) {
  auto it = std::find(attributes_.begin(), attributes_.end(), id_column_);
  if (it == attributes_.end()) {
    throw ParseError("table '" + name_ + "': id column '" + id_column_ + "' not in header");
  }
  id_index_ = static_cast<std::size_t>(it - attributes_.begin());
  id_lookup_.reserve(records_.size());
  for (std::size_t row = 0; row < records_.size(); ++row) {
    if (records_[row].size() != attributes_.size()) {
      throw ParseError("table '" + name_ + "': record " + std::to_string(row) +
                       " has wrong arity");
    }
    const Cell& id = records_[row][id_index_];
    if (!id) throw ParseError("table '" + name_ + "': null id in record " + std::to_string(row));
    if (!id_lookup_.emplace(*id, row).second) {
      throw ParseError("table '" + name_ + "': duplicate id \"" + *id + "\"");
    }
  }
}

std::optional<std::size_t> Table::find(std::string_view id) const {
  auto it = id_lookup_.find(std::string(id));
  if (it == id_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Table::column(std::string_view attribute) const {
  auto it = std::find(attributes_.begin(), attributes_.end(), attribute);
  if (it == attributes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - attributes_.begin());
}

std::vector<std::pair<std::vector<std::string>, std::size_t>> read_delimited(std::istream& in,
                                                                             char delimiter) {
  std::vector<std::pair<std::vector<std::string>, std::size_t>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  std::size_t line = 1;
  std::size_t row_start = 1;
  char c;
  auto end_row = [&] {
    if (row_has_content || !row.empty()) {
      row.push_back(std::move(field));
      rows.emplace_back(std::move(row), row_start);
    }
    row.clear();
    field.clear();
    row_has_content = false;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      row_has_content = true;
    } else if (c == delimiter) {
      row.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\r') {
      // tolerated before \n
    } else if (c == '\n') {
      end_row();
      ++line;
      row_start = line;
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field starting on line " +
                                  std::to_string(row_start));
  end_row();
  return rows;
}

Table parse_table(std::istream& in, std::string name, const std::string& id_column,
                  char delimiter) {
  auto rows = read_delimited(in, delimiter);
  if (rows.empty()) throw ParseError("table '" + name + "': missing header row");
  std::vector<std::string> header;
  for (auto& h : rows.front().first) header.emplace_back(trim(h));
  std::vector<Record> records;
  records.reserve(rows.size() - 1);
  const auto id_it = std::find(header.begin(), header.end(), id_column);
  const std::size_t id_col = static_cast<std::size_t>(id_it - header.begin());
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto& [fields, line] = rows[r];
    if (fields.size() != header.size()) {
      throw ParseError("table '" + name + "': line " + std::to_string(line) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    Record rec;
    rec.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      std::string_view v = trim(fields[c]);
      if (is_null_literal(v)) {
        rec.emplace_back(std::nullopt);
      } else if (c == id_col) {
        rec.emplace_back(std::string(v));
      } else {
        rec.emplace_back(normalize_text(v));
      }
    }
    if (id_it != header.end() && rec[id_col]) {
      auto [it, fresh] = seen.emplace(*rec[id_col], line);
      if (!fresh) {
        throw ParseError("table '" + name + "': duplicate id \"" + *rec[id_col] + "\" on lines " +
                         std::to_string(it->second) + " and " + std::to_string(line));
      }
    }
    records.push_back(std::move(rec));
  }
  return Table(std::move(name), std::move(header), id_column, std::move(records));
}

Table load_table(const std::string& path, const std::string& id_column, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open table file: " + path);
  return parse_table(in, path, id_column, delimiter);
}

void write_table(std::ostream& out, const Table& table, char delimiter) {
  auto emit = [&](std::string_view v) {
    const bool quote = v.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != v.npos;
    if (!quote) {
      out << v;
      return;
    }
    out << '"';
    for (char c : v) {
      if (c == '"') out << '"';
      out << c;
    }
    out << '"';
  };
  const auto& attrs = table.attributes();
  for (std::size_t c = 0; c < attrs.size(); ++c) {
    if (c) out << delimiter;
    emit(attrs[c]);
  }
  out << '\n';
  for (const auto& rec : table.records()) {
    for (std::size_t c = 0; c < rec.size(); ++c) {
      if (c) out << delimiter;
      if (rec[c]) emit(*rec[c]);
    }
    out << '\n';
  }
}

std::string_view to_string(AttributeType type) {
  switch (type) {
    case AttributeType::short_string: return "short-string";
    case AttributeType::long_string: return "long-string";
    case AttributeType::numeric: return "numeric";
    case AttributeType::categorical: return "categorical";
  }
  return "short-string";
}

AttributeType attribute_type_from_string(std::string_view name) {
  if (name == "short-string") return AttributeType::short_string;
  if (name == "long-string") return AttributeType::long_string;
  if (name == "numeric") return AttributeType::numeric;
  if (name == "categorical") return AttributeType::categorical;
  throw ParseError("unknown attribute type: " + std::string(name));
}

AttributeType infer_attribute_type(const std::vector<std::string_view>& values,
                                   const TypeInferenceConfig& config) {
  if (values.empty()) return AttributeType::short_string;
  std::size_t numeric = 0;
  std::size_t tokens = 0;
  std::unordered_set<std::string_view> distinct;
  for (auto v : values) {
    if (parses_as_number(v)) ++numeric;
    tokens += count_tokens(v);
    distinct.insert(v);
  }
  const double n = static_cast<double>(values.size());
  if (numeric >= config.numeric_fraction * n) return AttributeType::numeric;
  if (static_cast<double>(tokens) / n > config.long_string_tokens) {
    return AttributeType::long_string;
  }
  if (static_cast<double>(distinct.size()) / n < config.categorical_ratio) {
    return AttributeType::categorical;
  }
  return AttributeType::short_string;
}

AlignedSchema align_schemas(const Table& left, const Table& right,
                            const std::vector<std::pair<std::string, std::string>>& hints,
                            const TypeInferenceConfig& config) {
  std::vector<std::pair<std::string, std::string>> mapping;
  for (const auto& attr : left.attributes()) {
    if (attr == left.id_column()) continue;
    if (auto rc = right.column(attr); rc && attr != right.id_column()) {
      mapping.emplace_back(attr, attr);
    }
  }
  for (const auto& [l, r] : hints) {
    if (!left.column(l)) throw ParseError("hint names unknown left attribute '" + l + "'");
    if (!right.column(r)) throw ParseError("hint names unknown right attribute '" + r + "'");
    std::erase_if(mapping, [&](const auto& p) { return p.first == l || p.second == r; });
    mapping.emplace_back(l, r);
  }
  // Keep left-table attribute order regardless of where hints landed.
  std::stable_sort(mapping.begin(), mapping.end(), [&](const auto& a, const auto& b) {
    return *left.column(a.first) < *left.column(b.first);
  });
  if (mapping.empty()) {
    throw ParseError("no attributes align between '" + left.name() + "' and '" + right.name() +
                     "'");
  }

  AlignedSchema schema;
  for (const auto& [l, r] : mapping) {
    std::vector<std::string_view> values;
    const std::size_t lc = *left.column(l);
    const std::size_t rc = *right.column(r);
    for (const auto& rec : left.records())
      if (rec[lc]) values.emplace_back(*rec[lc]);
    for (const auto& rec : right.records())
      if (rec[rc]) values.emplace_back(*rec[rc]);
    schema.pairs.push_back({l, r, infer_attribute_type(values, config)});
  }
  return schema;
}

}  // namespace zeroer
