// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace tp {

using KvSections = std::map<std::string, std::map<std::string, std::string>>;

/// Parses a plain-text key-value file with optional [section] headers and
/// '#' comments. Keys outside any section land in the "" section.
KvSections parse_kv_file(const std::filesystem::path& path);
KvSections parse_kv_text(const std::string& text);

/// Canonical dump (sorted sections and keys) used for config hashing.
std::string canonical_kv(const KvSections& sections);

/// FNV-1a hash of the canonical form; embedded in every output artifact.
std::uint64_t config_hash(const KvSections& sections);

/// Typed accessors; `section.key` paths, ConfigError on missing/invalid.
class KvView {
public:
    explicit KvView(const KvSections& s) : s_(s) {}
    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& dflt) const;
    std::string require(const std::string& section, const std::string& key) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t dflt) const;
    double get_double(const std::string& section, const std::string& key, double dflt) const;
    bool get_bool(const std::string& section, const std::string& key, bool dflt) const;

private:
    const KvSections& s_;
};

}  // namespace tp
