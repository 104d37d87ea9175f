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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "zeroer/features.hpp"
#include "zeroer/table.hpp"

namespace zeroer::testing {

inline Table table_from(const std::string& csv, const std::string& name = "t",
                        const std::string& id = "id") {
  std::istringstream in(csv);
  return parse_table(in, name, id);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("zeroer-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(file(name), std::ios::binary) << content;
    return file(name);
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Feature matrix over given values with one group spanning all columns.
inline FeatureMatrix matrix_of(const Eigen::MatrixXd& values,
                               std::vector<std::size_t> groups = {}) {
  FeatureMatrix X;
  X.values = values;
  if (groups.empty()) groups.push_back(static_cast<std::size_t>(values.cols()));
  X.group_sizes = groups;
  for (Eigen::Index j = 0; j < values.cols(); ++j) X.feature_names.push_back("f" + std::to_string(j));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    X.pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)});
  return X;
}

}  // namespace zeroer::testing
