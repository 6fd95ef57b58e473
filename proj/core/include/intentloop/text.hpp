#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace intentloop {

/// Lowercases ASCII, splits on anything that is not alphanumeric and drops
/// empty tokens. Bytes >= 0x80 are kept as token characters so UTF-8 words
/// survive intact.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t value);

/// One step of the splitmix64 generator: advances `state` and returns the
/// mixed output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Small English stopword list used when stopword removal is enabled.
bool is_stopword(std::string_view token) noexcept;

}  // namespace intentloop
