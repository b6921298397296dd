#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qkg {

// Lowercase, strip punctuation, collapse runs of whitespace to single spaces.
// The result is the canonical key used by the entity name index.
std::string normalize_name(const std::string& s);

// Split a normalized string on single spaces. Empty tokens never appear.
std::vector<std::string> tokenize(const std::string& normalized);

std::string to_lower(const std::string& s);
std::string trim(const std::string& s);

// FNV-1a over bytes; stable across platforms, used for request fingerprints
// and config hashes.
std::uint64_t fnv1a64(const std::string& data);

}  // namespace qkg
