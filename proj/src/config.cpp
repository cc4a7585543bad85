// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/config.hpp"

#include <fstream>
#include <sstream>

#include "tp/errors.hpp"
#include "tp/tensor.hpp"

namespace tp {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KvSections parse_kv_text(const std::string& text) {
    KvSections out;
    std::string section;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            out[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        out[section][key] = value;
    }
    return out;
}

KvSections parse_kv_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config file missing: '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_kv_text(ss.str());
}

std::string canonical_kv(const KvSections& sections) {
    std::string out;
    for (const auto& [section, kv] : sections) {
        for (const auto& [key, value] : kv) {
            out += section;
            out += '.';
            out += key;
            out += '=';
            out += value;
            out += '\n';
        }
    }
    return out;
}

std::uint64_t config_hash(const KvSections& sections) {
    return fnv1a(canonical_kv(sections));
}

bool KvView::has(const std::string& section, const std::string& key) const {
    auto it = s_.find(section);
    return it != s_.end() && it->second.count(key) > 0;
}

std::string KvView::get(const std::string& section, const std::string& key,
                        const std::string& dflt) const {
    auto it = s_.find(section);
    if (it == s_.end()) return dflt;
    auto kt = it->second.find(key);
    return kt == it->second.end() ? dflt : kt->second;
}

std::string KvView::require(const std::string& section, const std::string& key) const {
    if (!has(section, key)) {
        throw ConfigError("config: missing required key [" + section + "] " + key);
    }
    return s_.at(section).at(key);
}

std::int64_t KvView::get_int(const std::string& section, const std::string& key,
                             std::int64_t dflt) const {
    if (!has(section, key)) return dflt;
    const auto& v = s_.at(section).at(key);
    try {
        return std::stoll(v);
    } catch (const std::exception&) {
        throw ConfigError("config: [" + section + "] " + key + " is not an integer: '" + v + "'");
    }
}

double KvView::get_double(const std::string& section, const std::string& key, double dflt) const {
    if (!has(section, key)) return dflt;
    const auto& v = s_.at(section).at(key);
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw ConfigError("config: [" + section + "] " + key + " is not a number: '" + v + "'");
    }
}

bool KvView::get_bool(const std::string& section, const std::string& key, bool dflt) const {
    if (!has(section, key)) return dflt;
    const auto& v = s_.at(section).at(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: [" + section + "] " + key + " is not a boolean: '" + v + "'");
}

}  // namespace tp
