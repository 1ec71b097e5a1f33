#include "qdlock/ini.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace qdlock {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

IniDoc IniDoc::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

IniDoc IniDoc::parse_string(const std::string& text, const std::string& origin) {
    IniDoc doc;
    doc.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    IniSection* cur = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            IniSection s;
            s.name = trim(line.substr(1, line.size() - 2));
            s.line = lineno;
            if (s.name.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": empty section name");
            if (doc.has_section(s.name))
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": duplicate section [" + s.name + "]");
            doc.sections_.push_back(std::move(s));
            cur = &doc.sections_.back();
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        if (!cur)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": key outside any section");
        IniEntry e;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = lineno;
        if (e.key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        for (const auto& prev : cur->entries)
            if (prev.key == e.key)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": duplicate key " + cur->name + "." + e.key);
        cur->entries.push_back(std::move(e));
    }
    return doc;
}

std::string IniDoc::serialize() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& s : sections_) {
        if (!first) out << "\n";
        first = false;
        out << "[" << s.name << "]\n";
        for (const auto& e : s.entries) out << e.key << " = " << e.value << "\n";
    }
    return out.str();
}

void IniDoc::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << serialize();
}

bool IniDoc::has_section(const std::string& name) const {
    return section(name) != nullptr;
}

const IniSection* IniDoc::section(const std::string& name) const {
    for (const auto& s : sections_)
        if (s.name == name) return &s;
    return nullptr;
}

std::optional<std::string> IniDoc::find(const std::string& sec,
                                        const std::string& key) const {
    const IniSection* s = section(sec);
    if (!s) return std::nullopt;
    for (const auto& e : s->entries)
        if (e.key == key) return e.value;
    return std::nullopt;
}

std::string IniDoc::get_string(const std::string& sec, const std::string& key) const {
    auto v = find(sec, key);
    if (!v)
        throw ConfigError(origin_ + ": missing required key " + sec + "." + key);
    return *v;
}

std::string IniDoc::get_string(const std::string& sec, const std::string& key,
                               const std::string& fallback) const {
    auto v = find(sec, key);
    return v ? *v : fallback;
}

double IniDoc::get_double(const std::string& sec, const std::string& key) const {
    const std::string v = get_string(sec, key);
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing junk");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": " + sec + "." + key + ": not a number: '" + v + "'");
    }
}

double IniDoc::get_double(const std::string& sec, const std::string& key,
                          double fallback) const {
    if (!find(sec, key)) return fallback;
    return get_double(sec, key);
}

std::uint64_t IniDoc::get_u64(const std::string& sec, const std::string& key) const {
    const std::string v = get_string(sec, key);
    try {
        std::size_t pos = 0;
        unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing junk");
        return u;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": " + sec + "." + key +
                          ": not an unsigned integer: '" + v + "'");
    }
}

bool IniDoc::get_bool(const std::string& sec, const std::string& key, bool fallback) const {
    auto v = find(sec, key);
    if (!v) return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(origin_ + ": " + sec + "." + key + ": not a boolean: '" + *v + "'");
}

void IniDoc::set(const std::string& path, const std::string& value) {
    auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
        throw ConfigError("override path must be 'section.key': " + path);
    const std::string sec = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    for (auto& s : sections_) {
        if (s.name != sec) continue;
        for (auto& e : s.entries) {
            if (e.key == key) {
                e.value = value;
                return;
            }
        }
        s.entries.push_back({key, value, 0});
        return;
    }
    IniSection s;
    s.name = sec;
    s.entries.push_back({key, value, 0});
    sections_.push_back(std::move(s));
}

std::vector<std::string> IniDoc::unknown_keys(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& schema) const {
    std::vector<std::string> out;
    for (const auto& s : sections_) {
        const std::vector<std::string>* allowed = nullptr;
        for (const auto& [name, keys] : schema)
            if (name == s.name) allowed = &keys;
        if (!allowed) {
            out.push_back(origin_ + ":" + std::to_string(s.line) +
                          ": unknown section [" + s.name + "]");
            continue;
        }
        for (const auto& e : s.entries) {
            if (std::find(allowed->begin(), allowed->end(), e.key) == allowed->end())
                out.push_back(origin_ + ":" + std::to_string(e.line) + ": unknown key " +
                              s.name + "." + e.key);
        }
    }
    return out;
}

}  // namespace qdlock
