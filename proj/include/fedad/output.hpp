// Copyright 2026 The fedad Authors
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
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "fedad/error.hpp"

namespace fedad {

/// Collects output files in memory and publishes them together: each file is
/// written to a temporary sibling, then renamed into place. If anything
/// fails, every file this set created is removed again.
class OutputSet {
 public:
  void add(std::filesystem::path path, std::string content) {
    files_.emplace_back(std::move(path), std::move(content));
  }

  bool empty() const noexcept { return files_.empty(); }

  void commit() {
    namespace fs = std::filesystem;
    std::vector<fs::path> temps;
    std::vector<fs::path> published;
    std::vector<fs::path> made_dirs;
    try {
      for (const auto& [path, content] : files_) {
        create_parents(path.parent_path(), made_dirs);
        fs::path tmp = path;
        tmp += ".tmp";
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        temps.push_back(tmp);
        out << content;
        out.close();
        if (!out) throw IoError("write failed for " + tmp.string());
      }
      for (std::size_t i = 0; i < files_.size(); ++i) {
        std::error_code ec;
        fs::rename(temps[i], files_[i].first, ec);
        if (ec) {
          throw IoError("cannot publish " + files_[i].first.string() + ": " +
                        ec.message());
        }
        published.push_back(files_[i].first);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& t : temps) fs::remove(t, ec);
      for (const auto& p : published) fs::remove(p, ec);
      for (auto it = made_dirs.rbegin(); it != made_dirs.rend(); ++it) {
        fs::remove(*it, ec);
      }
      throw;
    }
    files_.clear();
  }

 private:
  static void create_parents(const std::filesystem::path& dir,
                             std::vector<std::filesystem::path>& made) {
    namespace fs = std::filesystem;
    if (dir.empty() || fs::exists(dir)) return;
    create_parents(dir.parent_path(), made);
    std::error_code ec;
    if (!fs::create_directory(dir, ec) && ec) {
      throw IoError("cannot create directory " + dir.string() + ": " +
                    ec.message());
    }
    made.push_back(dir);
  }

  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

}  // namespace fedad
