#pragma once

// Flat `key = value` configuration: text files, JSON objects flattened to
// dotted keys, and typed value parsing that names the offending key.

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace popadj {

using ConfigEntries = std::map<std::string, std::string>;

/// `key = value` lines; `#` starts a comment. Duplicate keys are an error.
ConfigEntries parse_config_text(std::istream& is);
/// Nested objects become dotted keys, arrays become comma-separated lists.
ConfigEntries parse_config_json(const std::string& text);
/// Dispatches on a leading `{`.
ConfigEntries read_config_file(const std::string& path);

double parse_double(const std::string& key, const std::string& value);
int parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<double> parse_double_list(const std::string& key, const std::string& value);
/// Comma-separated items with surrounding blanks trimmed.
std::vector<std::string> split_list(const std::string& value);

/// Entries whose key starts with `prefix`, with the prefix removed.
ConfigEntries with_prefix(const ConfigEntries& entries, const std::string& prefix);
ConfigEntries without_prefix(const ConfigEntries& entries, const std::string& prefix);

}  // namespace popadj
