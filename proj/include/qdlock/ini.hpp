// Flat, sectioned key-value configuration files: "[section]" headers,
// "key = value" lines, '#' comments. Order-preserving, so parse ->
// serialize -> parse is the identity.
#ifndef QDLOCK_INI_HPP
#define QDLOCK_INI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdlock/common.hpp"

namespace qdlock {

struct IniEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct IniSection {
    std::string name;
    std::vector<IniEntry> entries;
    int line = 0;
};

class IniDoc {
public:
    static IniDoc parse_file(const std::string& path);
    static IniDoc parse_string(const std::string& text, const std::string& origin = "<string>");

    std::string serialize() const;
    void write(const std::string& path) const;

    bool has_section(const std::string& name) const;
    const IniSection* section(const std::string& name) const;

    /// Typed access; all throw ConfigError with origin:line / section.key.
    std::string get_string(const std::string& sec, const std::string& key) const;
    std::string get_string(const std::string& sec, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& sec, const std::string& key) const;
    double get_double(const std::string& sec, const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& sec, const std::string& key) const;
    bool get_bool(const std::string& sec, const std::string& key, bool fallback) const;

    /// "section.key" path; creates section/key as needed.
    void set(const std::string& path, const std::string& value);

    /// Unknown-key detection against a whitelist; returns "origin:line:
    /// section.key" style messages.
    std::vector<std::string> unknown_keys(
        const std::vector<std::pair<std::string, std::vector<std::string>>>& schema) const;

    const std::vector<IniSection>& sections() const { return sections_; }
    const std::string& origin() const { return origin_; }

private:
    std::optional<std::string> find(const std::string& sec, const std::string& key) const;
    std::vector<IniSection> sections_;
    std::string origin_;
};

}  // namespace qdlock

#endif
