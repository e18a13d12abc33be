// Copyright 2026 The dwarf-sceneflow Authors.
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
#include <map>
#include <string>

namespace dwarf {

/// Parsed "key = value" text. Blank lines and '#' comments are skipped.
class KeyValues {
   public:
    static KeyValues parse(const std::string& text, const std::string& source = "<text>");
    static KeyValues load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Throws if any key is not in `known`, naming the first offender.
    void require_known(std::initializer_list<const char*> known) const;

    const std::map<std::string, std::string>& values() const { return values_; }

   private:
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    std::string source_;
};

}  // namespace dwarf
