#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace csranker {

// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);

// Full-token double parse; throws DataError mentioning `context` on junk,
// partial parses, or non-finite values.
double parse_double(std::string_view token, const std::string& context);

long parse_long(std::string_view token, const std::string& context);

std::vector<std::string_view> split_tabs(std::string_view line);

// FNV-1a 64-bit, used for output digests in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string to_hex(std::uint64_t v);

}  // namespace csranker
