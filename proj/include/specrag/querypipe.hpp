#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace specrag {

class GenerationProvider;

/// Release / series / specification constraints mentioned by a query. Lists
/// are sorted ascending and duplicate-free; empty means unconstrained.
struct QueryMetadata {
    std::vector<std::string> release;
    std::vector<std::string> series;
    std::vector<std::string> specification;

    bool empty() const { return release.empty() && series.empty() && specification.empty(); }
    bool operator==(const QueryMetadata&) const = default;
};

enum class MetadataMode { Rules, Provider, Hybrid };

/// Grammar-based extraction:
///   release        "R17", "Rel-17", "release 17", "releases 17 and 18", "version 18" (10-99)
///   specification  \b\d{2}\.?\d{3}(\.[A-Za-z0-9]+)?\b
///   series         "series 23" / "specification 23", plus the first two
///                  digits of every extracted specification
QueryMetadata extract_metadata_rules(std::string_view query);

/// Parses the first JSON object in a provider response. Null or missing
/// entities become empty lists; an "R" prefix on releases is dropped.
QueryMetadata parse_metadata_response(std::string_view raw);

/// `provider` is required for Provider and Hybrid modes. Provider failures
/// fall back to the rules result. In Hybrid mode the rules win when the two
/// disagree about which dimension a value belongs to.
QueryMetadata extract_query_metadata(std::string_view query, MetadataMode mode = MetadataMode::Rules,
                                     const GenerationProvider* provider = nullptr);

/// Union of two metadata sets with series implied by every specification.
QueryMetadata merge(const QueryMetadata& a, const QueryMetadata& b);

inline constexpr std::size_t kMaxSubQueries = 3;
inline constexpr std::size_t kMaxFollowUps = 5;

struct QueryPlan {
    std::string original;
    std::vector<std::string> sub_queries;
    std::vector<std::string> follow_ups;
    QueryMetadata metadata;
    std::map<std::string, std::string> abbrev_expansions;
    std::vector<std::string> warnings;  // "provider-fallback", "parse-fallback", "clamped"
    std::vector<std::string> repairs;   // metadata tokens re-attached to sub-queries
};

std::string build_reformulation_prompt(std::string_view query);
std::string build_metadata_prompt(std::string_view query);

struct ParsedPlan {
    bool ok = false;
    std::vector<std::string> sub_queries;
    std::vector<std::string> follow_ups;
};

/// Accepts a JSON object with "sub_queries" (and optionally "follow_ups")
/// anywhere in the text, a single-quoted list in the same shape, or a plain
/// "Initial Queries: / Follow-up Analysis:" listing.
ParsedPlan parse_plan_response(std::string_view raw);

/// Asks the provider for a query plan. Never throws on provider failure:
/// the plan falls back to the original query with a warning.
QueryPlan reformulate(std::string_view query, const GenerationProvider& provider,
                      double temperature = 0.7);

/// Abbreviation -> expansion, loaded from "ABBR<TAB>expansion" lines.
class Glossary {
  public:
    static Glossary parse(std::string_view tsv, std::string_view source = "<memory>");
    static Glossary load(const std::filesystem::path& path);
    static Glossary builtin();

    const std::map<std::string, std::string>& entries() const { return entries_; }
    void add(std::string abbreviation, std::string expansion);

  private:
    std::map<std::string, std::string> entries_;
};

/// Appends " (expansion)" after the first whole-word occurrence of every
/// glossary abbreviation. Idempotent. `applied` receives the expansions used.
std::string expand_abbreviations(std::string_view query, const Glossary& glossary,
                                 std::map<std::string, std::string>* applied = nullptr);

}  // namespace specrag
