#pragma once
// Small text, hashing and file helpers.

#include <filesystem>
#include <string>
#include <string_view>

namespace citedag {

std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Lowercase, punctuation stripped, whitespace collapsed.
std::string normalize_title(std::string_view title);

std::size_t levenshtein(std::string_view a, std::string_view b);
// 1 - distance / max(len); 1.0 for two empty strings.
double levenshtein_similarity(std::string_view a, std::string_view b);

std::string to_lower_ascii(std::string_view text);

// Rounds to 6 decimals so serialized floats have a fixed precision.
double round6(double value);

}  // namespace citedag
