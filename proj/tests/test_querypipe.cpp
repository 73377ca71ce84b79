#include <doctest.h>

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/sha.h>

#include "specrag/error.hpp"
#include "specrag/providers.hpp"
#include "specrag/querypipe.hpp"
#include "specrag/resources.hpp"
#include "support.hpp"

using namespace specrag;
using namespace specrag::testing;
using Strings = std::vector<std::string>;

namespace {

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
    std::ostringstream out;
    for (unsigned char c : md) out << std::hex << std::setw(2) << std::setfill('0') << int(c);
    return out.str();
}

class Scripted final : public GenerationProvider {
  public:
    explicit Scripted(std::string reply, bool fail = false) : reply_(std::move(reply)), fail_(fail) {}
    std::string name() const override { return "scripted"; }
    std::string complete(const GenerationRequest& r) const override {
        last_prompt = r.prompt;
        if (fail_) throw ProviderError(ProviderFailure::Timeout, "slow");
        return reply_;
    }
    mutable std::string last_prompt;

  private:
    std::string reply_;
    bool fail_;
};

bool subset(const Strings& a, const Strings& b) {
    return std::all_of(a.begin(), a.end(),
                       [&](const std::string& x) { return std::find(b.begin(), b.end(), x) != b.end(); });
}

bool sorted_unique(const Strings& v) {
    return std::is_sorted(v.begin(), v.end()) && std::adjacent_find(v.begin(), v.end()) == v.end();
}

}  // namespace

TEST_CASE("metadata from the comparison query") {
    auto m = extract_query_metadata(
        "Compare the architecture changes in specification 23.558 between R17 and R18");
    CHECK(m.release == Strings{"17", "18"});
    CHECK(m.series == Strings{"23"});
    CHECK(m.specification == Strings{"23.558"});
}

TEST_CASE("metadata edge forms") {
    auto m = extract_query_metadata("23.588.h00");
    CHECK(m.specification == Strings{"23.588.h00"});
    CHECK(m.series == Strings{"23"});
    CHECK(m.release.empty());
    CHECK(extract_query_metadata("hello").empty());

    CHECK(extract_metadata_rules("What changed in Rel-16?").release == Strings{"16"});
    CHECK(extract_metadata_rules("releases 17 and 18 only").release == Strings{"17", "18"});
    CHECK(extract_metadata_rules("version 18 of it").release == Strings{"18"});
    CHECK(extract_metadata_rules("series 29 documents").series == Strings{"29"});
    // bare numbers are neither release nor series
    CHECK(extract_metadata_rules("about 17 things in 23 places").empty());
    CHECK(extract_metadata_rules("spec 33501 and 23.501").specification == Strings{"23.501", "33501"});
    CHECK(extract_metadata_rules("spec 33501 and 23.501").series == Strings{"23", "33"});
}

TEST_CASE("rules extraction finds planted tokens") {
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        std::set<std::string> releases, specs;
        std::string q = words(rng, 3);
        int nr = rng.between(0, 3), ns = rng.between(0, 3);
        for (int j = 0; j < nr; ++j) {
            auto r = std::to_string(rng.between(10, 99));
            releases.insert(r);
            q += (rng.chance(0.5) ? " R" : " release ") + r + " " + words(rng, 2);
        }
        for (int j = 0; j < ns; ++j) {
            auto s = std::to_string(rng.between(10, 99)) + (rng.chance(0.5) ? "." : "") +
                     std::to_string(rng.between(100, 999));
            specs.insert(s);
            q += " " + s + " " + words(rng, 2);
        }
        auto m = extract_metadata_rules(q);
        CHECK(sorted_unique(m.release));
        CHECK(sorted_unique(m.series));
        CHECK(sorted_unique(m.specification));
        CHECK(subset(Strings(releases.begin(), releases.end()), m.release));
        CHECK(subset(Strings(specs.begin(), specs.end()), m.specification));
        for (const auto& s : m.specification) {
            CHECK(std::find(m.series.begin(), m.series.end(), s.substr(0, 2)) != m.series.end());
        }
        CHECK(extract_metadata_rules(q) == m);
    }
}

TEST_CASE("provider metadata responses") {
    auto m = parse_metadata_response(
        "Sure: {\"release\": [\"R17\", \"18\"], \"series\": null, \"specification\": \"23.558\"}");
    CHECK(m.release == Strings{"17", "18"});
    CHECK(m.specification == Strings{"23.558"});
    CHECK(parse_metadata_response("no json").empty());

    Scripted p(R"({"release": ["18"], "series": ["23"], "specification": ["23.501"]})");
    auto hybrid = extract_query_metadata("in R17 what is new", MetadataMode::Hybrid, &p);
    CHECK(hybrid.release == Strings{"17", "18"});
    CHECK(hybrid.specification == Strings{"23.501"});
    CHECK(p.last_prompt.find("in R17 what is new") != std::string::npos);

    // the rules put 17 in release, so the provider may not call it a series
    Scripted conflict(R"({"release": [], "series": ["17"], "specification": []})");
    CHECK(extract_query_metadata("R17 only", MetadataMode::Hybrid, &conflict).series.empty());

    Scripted down("", true);
    CHECK(extract_query_metadata("R17", MetadataMode::Provider, &down).release == Strings{"17"});
    CHECK_THROWS_AS(extract_query_metadata("R17", MetadataMode::Provider), Error);

    StubGenerationProvider stub;
    auto s = extract_query_metadata(
        "Compare the architecture changes in specification 23.558 between R17 and R18",
        MetadataMode::Provider, &stub);
    CHECK(s.release == Strings{"17", "18"});
    CHECK(s.specification == Strings{"23.558"});
}

TEST_CASE("merge implies series") {
    QueryMetadata a{{"17"}, {}, {"29.510"}};
    QueryMetadata b{{"17", "16"}, {"23"}, {}};
    auto m = merge(a, b);
    CHECK(m.release == Strings{"16", "17"});
    CHECK(m.series == Strings{"23", "29"});
}

TEST_CASE("reformulation with a simple query") {
    StubGenerationProvider stub;
    auto plan = reformulate("What is AMF?", stub);
    CHECK(plan.sub_queries == Strings{"What is AMF?"});
    CHECK(plan.follow_ups.empty());
    CHECK(plan.warnings.empty());
}

TEST_CASE("reformulation clamps and falls back") {
    Scripted five(R"({"sub_queries": ["a?", "b?", "c?", "d?", "e?"],
                      "follow_ups": ["1", "2", "3", "4", "5", "6", "7"]})");
    auto plan = reformulate("q", five);
    CHECK(plan.sub_queries == Strings{"a?", "b?", "c?"});
    CHECK(plan.follow_ups.size() == 5);
    CHECK(std::count(plan.warnings.begin(), plan.warnings.end(), "clamped") == 1);
    CHECK(five.last_prompt == build_reformulation_prompt("q"));

    Scripted junk("I cannot help with that.");
    auto p2 = reformulate("what is X", junk);
    CHECK(p2.sub_queries == Strings{"what is X"});
    CHECK(p2.warnings == Strings{"parse-fallback"});

    Scripted down("", true);
    auto p3 = reformulate("what is X", down);
    CHECK(p3.sub_queries == Strings{"what is X"});
    CHECK(p3.warnings == Strings{"provider-fallback"});

    CHECK_THROWS_AS(reformulate("  ", down), Error);
}

TEST_CASE("plan parsing tolerates drift") {
    auto a = parse_plan_response("Here you go:\n```json\n{\"sub_queries\": [\"x?\"]}\n```");
    CHECK(a.ok);
    CHECK(a.sub_queries == Strings{"x?"});
    auto b = parse_plan_response("{'sub_queries': ['one?', 'two?'], 'follow_ups': ['three?']}");
    CHECK(b.ok);
    CHECK(b.sub_queries == Strings{"one?", "two?"});
    CHECK(b.follow_ups == Strings{"three?"});
    auto c = parse_plan_response("Initial Queries:\n- first?\n- second?\nFollow-up Analysis:\n- third?\n");
    CHECK(c.sub_queries == Strings{"first?", "second?"});
    CHECK(c.follow_ups == Strings{"third?"});
    CHECK_FALSE(parse_plan_response("{\"sub_queries\": []}").ok);
    CHECK_FALSE(parse_plan_response("").ok);
}

TEST_CASE("plans never lose metadata and stay within bounds") {
    Rng rng(13);
    for (int i = 0; i < 300; ++i) {
        std::string q = words(rng, 4) + " R" + std::to_string(rng.between(15, 19)) + " " +
                        std::to_string(rng.between(21, 38)) + "." + std::to_string(rng.between(100, 999));
        if (rng.chance(0.3)) q += " series " + std::to_string(rng.between(10, 99));
        std::string reply = "{\"sub_queries\": [";
        int n = rng.between(1, 6);
        for (int j = 0; j < n; ++j) reply += (j ? ", \"" : "\"") + words(rng, 3) + "?\"";
        reply += "], \"follow_ups\": [";
        int f = rng.between(0, 8);
        for (int j = 0; j < f; ++j) reply += (j ? ", \"" : "\"") + words(rng, 2) + "\"";
        reply += "]}";
        Scripted p(reply);
        auto plan = reformulate(q, p);
        CHECK(plan.sub_queries.size() <= kMaxSubQueries);
        CHECK(plan.follow_ups.size() <= kMaxFollowUps);
        QueryMetadata have;
        for (const auto& s : plan.sub_queries) have = merge(have, extract_metadata_rules(s));
        auto want = extract_metadata_rules(q);
        CHECK(subset(want.release, have.release));
        CHECK(subset(want.series, have.series));
        CHECK(subset(want.specification, have.specification));
    }
}

TEST_CASE("abbreviation expansion") {
    Glossary g;
    g.add("AMF", "Access and Mobility Management Function");
    CHECK(expand_abbreviations("What is AMF?", g) ==
          "What is AMF (Access and Mobility Management Function)?");
    CHECK(expand_abbreviations("nothing here", g) == "nothing here");
    auto once = expand_abbreviations("AMF talks to AMF", g);
    CHECK(once == "AMF (Access and Mobility Management Function) talks to AMF");
    CHECK(expand_abbreviations(once, g) == once);
    CHECK(expand_abbreviations("SAMFOO", g) == "SAMFOO");
    std::map<std::string, std::string> applied;
    expand_abbreviations("AMF", g, &applied);
    CHECK(applied.at("AMF") == "Access and Mobility Management Function");

    CHECK(Glossary::builtin().entries().at("AMF") == "Access and Mobility Management Function");
    CHECK(Glossary::parse("# c\nSMF\tSession Management Function\n").entries().size() == 1);
    CHECK_THROWS_AS(Glossary::parse("SMF Session"), Error);
    CHECK_THROWS_AS(Glossary::load("/nonexistent/glossary.tsv"), Error);
}

TEST_CASE("expansion is idempotent on random queries") {
    Glossary g = Glossary::builtin();
    Strings abbrs;
    for (const auto& [a, e] : g.entries()) abbrs.push_back(a);
    Rng rng(17);
    for (int i = 0; i < 300; ++i) {
        std::string q = words(rng, 2);
        for (int j = rng.between(0, 4); j > 0; --j) q += " " + rng.pick(abbrs) + " " + words(rng, 1);
        auto once = expand_abbreviations(q, g);
        CHECK(expand_abbreviations(once, g) == once);
    }
}

TEST_CASE("shipped prompts are pinned") {
    CHECK(sha256_hex(resources::query_reformulation_prompt()) ==
          "434c041f7e7f4eef7aabc45c7a55c547a3964c8f9b36b10c487b56da19768a52");
    CHECK(sha256_hex(resources::query_metadata_prompt()) ==
          "ad57a49227959e621a44396aaae1e81c9977e30e293ca9307c39ce34dda78ff2");
    CHECK(sha256_hex(resources::answer_generation_prompt()) ==
          "bfc6b3b3e2742e04620c5b6202f270a8b070f59d47c308f481f33d4f40031ecb");
    CHECK(read_file(source_dir() / "prompts/query_reformulation.txt") ==
          resources::query_reformulation_prompt());
    CHECK(read_file(source_dir() / "prompts/query_metadata.txt") == resources::query_metadata_prompt());
    CHECK(read_file(source_dir() / "prompts/answer_generation.txt") ==
          resources::answer_generation_prompt());
    CHECK(build_metadata_prompt("abc").find("abc") != std::string::npos);
}
