#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace specrag::text {

/// Whitespace-delimited units. This is the token-counting rule used for
/// chunk sizes and context budgets.
std::vector<std::string> whitespace_tokens(std::string_view text);
std::size_t count_tokens(std::string_view text);

/// Lexical terms: ASCII-lowercased, split on non-alphanumerics. A '.' between
/// a digit and an alphanumeric is kept, so "23.558" and "23.588.h00" stay one
/// term. Bytes >= 0x80 count as alphanumeric so UTF-8 words survive intact.
std::vector<std::string> terms(std::string_view text);

/// Sentences end at '.', '?' or '!' followed by whitespace (or end of text);
/// newlines also end a sentence. Results are trimmed, empties dropped.
std::vector<std::string> sentences(std::string_view text);

bool is_stopword(std::string_view lowercase_word);

/// Distinct lexical terms minus stopwords.
std::set<std::string> content_words(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// FNV-1a 64 with the seed folded into the offset basis.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0);

}  // namespace specrag::text
