#include "specrag/querypipe.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "specrag/error.hpp"
#include "specrag/providers.hpp"
#include "specrag/resources.hpp"
#include "specrag/text.hpp"

namespace specrag {
namespace {

using json = nlohmann::json;

void normalize(std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

bool valid_release(const std::string& r) {
    if (r.size() != 2 || !std::isdigit(static_cast<unsigned char>(r[0])) ||
        !std::isdigit(static_cast<unsigned char>(r[1]))) {
        return false;
    }
    return r[0] != '0';
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

std::string substitute(std::string_view tmpl, std::string_view placeholder, std::string_view value) {
    std::string out(tmpl);
    auto pos = out.find(placeholder);
    if (pos != std::string::npos) out.replace(pos, placeholder.size(), value);
    return out;
}

// First balanced {...} object in `raw`, ignoring braces inside string literals.
std::optional<std::string> first_object(std::string_view raw, std::size_t from = 0) {
    for (std::size_t start = raw.find('{', from); start != std::string_view::npos;
         start = raw.find('{', start + 1)) {
        int depth = 0;
        char quote = 0;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (quote) {
                if (c == '\\') {
                    ++i;
                } else if (c == quote) {
                    quote = 0;
                }
                continue;
            }
            if (c == '"') {
                quote = c;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                return std::string(raw.substr(start, i - start + 1));
            }
        }
    }
    return std::nullopt;
}

std::vector<std::string> json_strings(const json& v) {
    std::vector<std::string> out;
    auto push = [&](const json& x) {
        if (x.is_string()) {
            out.push_back(x.get<std::string>());
        } else if (x.is_number_integer()) {
            out.push_back(std::to_string(x.get<long long>()));
        } else if (x.is_number()) {
            std::ostringstream s;
            s << x.get<double>();
            out.push_back(s.str());
        }
    };
    if (v.is_array()) {
        for (const auto& x : v) push(x);
    } else {
        push(v);
    }
    return out;
}

// Quoted strings ('...' or "...") inside the [...] that follows `key`.
std::optional<std::vector<std::string>> lenient_list(std::string_view raw, std::string_view key) {
    auto k = raw.find(key);
    if (k == std::string_view::npos) return std::nullopt;
    auto open = raw.find('[', k);
    if (open == std::string_view::npos) return std::nullopt;
    std::vector<std::string> out;
    std::size_t i = open + 1;
    while (i < raw.size()) {
        char c = raw[i];
        if (c == ']') return out;
        if (c == '"' || c == '\'') {
            std::string item;
            std::size_t j = i + 1;
            for (; j < raw.size() && raw[j] != c; ++j) {
                if (raw[j] == '\\' && j + 1 < raw.size()) ++j;
                item.push_back(raw[j]);
            }
            if (j >= raw.size()) return std::nullopt;
            out.push_back(item);
            i = j + 1;
            continue;
        }
        ++i;
    }
    return std::nullopt;
}

void clean(std::vector<std::string>& items) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& s : items) {
        auto t = text::trim(s);
        if (t.empty() || t == "...") continue;
        if (seen.insert(t).second) out.push_back(std::move(t));
    }
    items = std::move(out);
}

}  // namespace

// ---------------------------------------------------------------------------
// Metadata

QueryMetadata extract_metadata_rules(std::string_view query) {
    static const std::regex release_prefixed(R"(\b[Rr](1[0-9]|[2-9][0-9])\b)");
    static const std::regex release_keyword(
        R"(\b(?:[Rr]el(?:ease)?s?|[Vv]ersions?)[-. ]?\s*(1[0-9]|[2-9][0-9])\b((?:\s*(?:,|and|&|or|to|vs\.?|versus)\s*(?:[Rr](?:el(?:ease)?)?[-. ]?)?(?:1[0-9]|[2-9][0-9])\b)*))");
    static const std::regex release_number(R"((1[0-9]|[2-9][0-9])\b)");
    static const std::regex spec_re(R"(\b\d{2}\.?\d{3}(?:\.[A-Za-z0-9]+)?\b)");
    static const std::regex series_re(
        R"(\b(?:[Ss]eries|[Ss]pecifications?|[Ss]pecs?|TS)\s+(\d{2})\b(?![.\d]))");

    const std::string q(query);
    QueryMetadata meta;
    for (std::sregex_iterator it(q.begin(), q.end(), release_prefixed), end; it != end; ++it) {
        meta.release.push_back((*it)[1].str());
    }
    for (std::sregex_iterator it(q.begin(), q.end(), release_keyword), end; it != end; ++it) {
        meta.release.push_back((*it)[1].str());
        const std::string tail = (*it)[2].str();
        for (std::sregex_iterator n(tail.begin(), tail.end(), release_number); n != end; ++n) {
            meta.release.push_back((*n)[1].str());
        }
    }
    // Spec numbers must not be mistaken for anything else; mask versions first.
    static const std::regex version_re(R"(\b[Vv]\d{1,3}\.\d{1,3}\.\d{1,3}\b)");
    const std::string masked = std::regex_replace(q, version_re, " ");
    for (std::sregex_iterator it(masked.begin(), masked.end(), spec_re), end; it != end; ++it) {
        meta.specification.push_back(it->str());
    }
    for (std::sregex_iterator it(masked.begin(), masked.end(), series_re), end; it != end; ++it) {
        meta.series.push_back((*it)[1].str());
    }
    for (const auto& s : meta.specification) meta.series.push_back(s.substr(0, 2));
    normalize(meta.release);
    normalize(meta.series);
    normalize(meta.specification);
    return meta;
}

QueryMetadata parse_metadata_response(std::string_view raw) {
    QueryMetadata meta;
    auto obj = first_object(raw);
    if (!obj) return meta;
    json j = json::parse(*obj, nullptr, false);
    if (!j.is_object()) return meta;
    auto field = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::vector<std::string>{};
        return json_strings(*it);
    };
    for (auto r : field("release")) {
        r = text::trim(r);
        if (!r.empty() && (r[0] == 'R' || r[0] == 'r')) r.erase(0, 1);
        if (valid_release(r)) meta.release.push_back(r);
    }
    for (auto s : field("series")) {
        s = text::trim(s);
        if (!s.empty()) meta.series.push_back(s);
    }
    for (auto s : field("specification")) {
        s = text::trim(s);
        if (!s.empty()) meta.specification.push_back(s);
    }
    for (const auto& s : meta.specification) {
        if (s.size() >= 2) meta.series.push_back(s.substr(0, 2));
    }
    normalize(meta.release);
    normalize(meta.series);
    normalize(meta.specification);
    return meta;
}

QueryMetadata merge(const QueryMetadata& a, const QueryMetadata& b) {
    QueryMetadata out = a;
    out.release.insert(out.release.end(), b.release.begin(), b.release.end());
    out.series.insert(out.series.end(), b.series.begin(), b.series.end());
    out.specification.insert(out.specification.end(), b.specification.begin(),
                             b.specification.end());
    for (const auto& s : out.specification) out.series.push_back(s.substr(0, 2));
    normalize(out.release);
    normalize(out.series);
    normalize(out.specification);
    return out;
}

std::string build_metadata_prompt(std::string_view query) {
    return substitute(resources::query_metadata_prompt(), "{query}", query);
}

QueryMetadata extract_query_metadata(std::string_view query, MetadataMode mode,
                                     const GenerationProvider* provider) {
    QueryMetadata rules = extract_metadata_rules(query);
    if (mode == MetadataMode::Rules) return rules;
    if (!provider) {
        throw Error(ErrorCode::InvalidArgument, "metadata extraction mode needs a provider");
    }
    QueryMetadata from_provider;
    try {
        GenerationRequest req;
        req.prompt = build_metadata_prompt(query);
        req.temperature = 0.0;
        from_provider = parse_metadata_response(generate(req, *provider));
    } catch (const ProviderError&) {
        return rules;
    }
    if (mode == MetadataMode::Provider) return from_provider;

    // Values the rules placed in one dimension are not accepted in another.
    auto claimed_elsewhere = [&](const std::string& v, const std::vector<std::string>& own) {
        if (contains(own, v)) return false;
        return contains(rules.release, v) || contains(rules.series, v) ||
               contains(rules.specification, v);
    };
    QueryMetadata filtered;
    for (const auto& v : from_provider.release) {
        if (!claimed_elsewhere(v, rules.release)) filtered.release.push_back(v);
    }
    for (const auto& v : from_provider.series) {
        if (!claimed_elsewhere(v, rules.series)) filtered.series.push_back(v);
    }
    for (const auto& v : from_provider.specification) {
        if (!claimed_elsewhere(v, rules.specification)) filtered.specification.push_back(v);
    }
    return merge(rules, filtered);
}

// ---------------------------------------------------------------------------
// Reformulation

std::string build_reformulation_prompt(std::string_view query) {
    return substitute(resources::query_reformulation_prompt(), "{query}", query);
}

ParsedPlan parse_plan_response(std::string_view raw) {
    ParsedPlan plan;
    for (std::size_t from = 0;;) {
        auto obj = first_object(raw, from);
        if (!obj) break;
        json j = json::parse(*obj, nullptr, false);
        if (j.is_object() && j.contains("sub_queries")) {
            plan.sub_queries = json_strings(j["sub_queries"]);
            for (const char* key : {"follow_ups", "follow_up_queries", "followups"}) {
                if (j.contains(key)) plan.follow_ups = json_strings(j[key]);
            }
            plan.ok = true;
            break;
        }
        from = raw.find(*obj, from) + 1;
    }
    if (!plan.ok) {
        if (auto subs = lenient_list(raw, "sub_queries")) {
            plan.sub_queries = *subs;
            if (auto f = lenient_list(raw, "follow_ups")) plan.follow_ups = *f;
            plan.ok = true;
        }
    }
    if (!plan.ok) {
        auto initial = raw.find("Initial Queries:");
        if (initial != std::string_view::npos) {
            auto follow = raw.find("Follow-up Analysis:");
            auto lines = [](std::string_view block) {
                std::vector<std::string> out;
                std::istringstream in{std::string(block)};
                std::string line;
                while (std::getline(in, line)) {
                    line = text::trim(line);
                    while (!line.empty() && line.back() == '\\') line.pop_back();
                    line = text::trim(line);
                    if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
                        line = text::trim(std::string_view(line).substr(1));
                    }
                    if (!line.empty()) out.push_back(line);
                }
                return out;
            };
            auto start = initial + std::string_view("Initial Queries:").size();
            plan.sub_queries = lines(raw.substr(start, follow == std::string_view::npos
                                                           ? std::string_view::npos
                                                           : follow - start));
            if (follow != std::string_view::npos) {
                plan.follow_ups =
                    lines(raw.substr(follow + std::string_view("Follow-up Analysis:").size()));
            }
            plan.ok = !plan.sub_queries.empty();
        }
    }
    clean(plan.sub_queries);
    clean(plan.follow_ups);
    if (plan.sub_queries.empty()) plan.ok = false;
    return plan;
}

namespace {

// Re-attaches metadata tokens of the original query that no sub-query carries.
void repair_metadata(QueryPlan& plan) {
    const QueryMetadata want = extract_metadata_rules(plan.original);
    QueryMetadata have;
    for (const auto& s : plan.sub_queries) have = merge(have, extract_metadata_rules(s));

    std::vector<std::string> parts;
    std::vector<std::string> missing_specs, missing_releases, missing_series;
    for (const auto& s : want.specification) {
        if (!contains(have.specification, s)) missing_specs.push_back(s);
    }
    for (const auto& r : want.release) {
        if (!contains(have.release, r)) missing_releases.push_back("R" + r);
    }
    for (const auto& s : want.series) {
        bool implied = std::any_of(missing_specs.begin(), missing_specs.end(),
                                   [&](const std::string& spec) { return spec.rfind(s, 0) == 0; });
        if (!contains(have.series, s) && !implied) missing_series.push_back(s);
    }
    if (!missing_specs.empty()) parts.push_back("specification " + text::join(missing_specs, ", "));
    if (!missing_releases.empty()) {
        parts.push_back((missing_releases.size() == 1 ? "release " : "releases ") +
                        text::join(missing_releases, ", "));
    }
    if (!missing_series.empty()) parts.push_back("series " + text::join(missing_series, ", "));
    if (parts.empty()) return;
    std::string suffix = " (" + text::join(parts, "; ") + ")";
    plan.sub_queries.front() += suffix;
    plan.repairs.push_back("appended" + suffix + " to sub-query 1");
}

}  // namespace

QueryPlan reformulate(std::string_view query, const GenerationProvider& provider,
                      double temperature) {
    if (text::trim(query).empty()) {
        throw Error(ErrorCode::InvalidArgument, "reformulate: empty query");
    }
    QueryPlan plan;
    plan.original = std::string(query);
    plan.metadata = extract_metadata_rules(query);

    ParsedPlan parsed;
    try {
        GenerationRequest req;
        req.prompt = build_reformulation_prompt(query);
        req.temperature = temperature;
        parsed = parse_plan_response(generate(req, provider));
        if (!parsed.ok) plan.warnings.push_back("parse-fallback");
    } catch (const ProviderError&) {
        plan.warnings.push_back("provider-fallback");
    }
    if (!parsed.ok) {
        plan.sub_queries = {plan.original};
        return plan;
    }
    plan.sub_queries = std::move(parsed.sub_queries);
    plan.follow_ups = std::move(parsed.follow_ups);
    if (plan.sub_queries.size() > kMaxSubQueries || plan.follow_ups.size() > kMaxFollowUps) {
        plan.warnings.push_back("clamped");
    }
    if (plan.sub_queries.size() > kMaxSubQueries) plan.sub_queries.resize(kMaxSubQueries);
    if (plan.follow_ups.size() > kMaxFollowUps) plan.follow_ups.resize(kMaxFollowUps);
    repair_metadata(plan);
    return plan;
}

// ---------------------------------------------------------------------------
// Glossary

Glossary Glossary::parse(std::string_view tsv, std::string_view source) {
    Glossary g;
    std::istringstream in{std::string(tsv)};
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::ConfigError, std::string(source) + ":" + std::to_string(n) +
                                                    ": expected ABBR<TAB>expansion");
        }
        auto abbr = text::trim(line.substr(0, tab));
        auto expansion = text::trim(line.substr(tab + 1));
        if (abbr.empty() || expansion.empty()) {
            throw Error(ErrorCode::ConfigError,
                        std::string(source) + ":" + std::to_string(n) + ": empty field");
        }
        g.add(std::move(abbr), std::move(expansion));
    }
    return g;
}

Glossary Glossary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open glossary " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

Glossary Glossary::builtin() { return parse(resources::default_glossary(), "<builtin glossary>"); }

void Glossary::add(std::string abbreviation, std::string expansion) {
    entries_[std::move(abbreviation)] = std::move(expansion);
}

std::string expand_abbreviations(std::string_view query, const Glossary& glossary,
                                 std::map<std::string, std::string>* applied) {
    auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    std::string out(query);
    for (const auto& [abbr, expansion] : glossary.entries()) {
        std::size_t pos = 0;
        for (; (pos = out.find(abbr, pos)) != std::string::npos; pos += abbr.size()) {
            bool left_ok = pos == 0 || !word_char(out[pos - 1]);
            std::size_t end = pos + abbr.size();
            bool right_ok = end == out.size() || !word_char(out[end]);
            if (left_ok && right_ok) break;
        }
        if (pos == std::string::npos) continue;
        const std::string insert = " (" + expansion + ")";
        std::size_t end = pos + abbr.size();
        if (out.compare(end, insert.size(), insert) != 0) out.insert(end, insert);
        if (applied) (*applied)[abbr] = expansion;
    }
    return out;
}

}  // namespace specrag
