#include <doctest.h>

#include "specrag/error.hpp"
#include "specrag/media.hpp"
#include "specrag/providers.hpp"
#include "specrag/text.hpp"
#include "support.hpp"

using namespace specrag;
using specrag::testing::Rng;

namespace {

class FailingDescriber final : public DescriptionProvider {
  public:
    std::string name() const override { return "failing"; }
    std::string describe_table(const Block&) const override {
        throw ProviderError(ProviderFailure::Timeout, "slow");
    }
    std::string describe_image(const Block&) const override { return ""; }
};

Chunk plain_chunk(std::string body) {
    Chunk c;
    c.chunk_id = "d::S::0";
    c.doc_name = "d";
    c.text = body;
    return c;
}

bool is_subsequence(const std::vector<std::string>& small, const std::vector<std::string>& big) {
    std::size_t j = 0;
    for (const auto& t : big) {
        if (j < small.size() && small[j] == t) ++j;
    }
    return j == small.size();
}

}  // namespace

TEST_CASE("stub descriptions") {
    StubDescriptionProvider stub;
    auto table = Block::table("t", {{"A", "B"}, {"1", "2"}});
    CHECK(describe_media(table, stub) == "table with 2 rows and 2 columns; headers: A, B; first row: 1, 2");
    auto image = Block::image("img-7", "System architecture");
    CHECK(describe_media(image, stub) == "figure img-7: System architecture");
}

TEST_CASE("empty tables are provider errors") {
    StubDescriptionProvider stub;
    try {
        describe_media(Block::table("t0", {}), stub);
        FAIL("empty table described");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderFailure::EmptyMedia);
        CHECK(std::string(e.what()).find("t0") != std::string::npos);
    }
}

TEST_CASE("provider failures keep the media id") {
    FailingDescriber bad;
    try {
        describe_media(Block::table("tab-9", {{"x"}}), bad);
        FAIL("no error");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderFailure::Timeout);
        CHECK(e.retryable());
        CHECK(std::string(e.what()).find("tab-9") != std::string::npos);
    }
    CHECK_THROWS_AS(describe_media(Block::image("i", "c"), bad), ProviderError);
    CHECK_THROWS_AS(describe_media(Block::paragraph("p"), bad), Error);
}

TEST_CASE("marker grammar") {
    CHECK(make_marker(BlockKind::Image, 1) == "[IMG_001]");
    CHECK(make_marker(BlockKind::Table, 42) == "[TAB_042]");
    CHECK(is_marker("[IMG_999]"));
    CHECK_FALSE(is_marker("[IMG_1]"));
    CHECK_FALSE(is_marker("[FIG_001]"));
    CHECK(scan_markers("a [TAB_002] b [IMG_001]") == std::vector<std::string>{"[TAB_002]", "[IMG_001]"});
}

TEST_CASE("tagging inserts description and marker at the block position") {
    auto c = plain_chunk("see below.");
    c.media_slots = {{"f1", 2}};
    MediaRecord r{"[IMG_001]", "f1", "d", "", "D", ""};
    auto tagged = tag_chunk(c, {r});
    CHECK(tagged.text == "see below. D [IMG_001]");
    CHECK(tagged.media_markers == std::vector<std::string>{"[IMG_001]"});
}

TEST_CASE("tagging without media is the identity") {
    auto c = plain_chunk("nothing here");
    CHECK(tag_chunk(c, {}) == c);
}

TEST_CASE("table then image keep block order and re-tagging is rejected") {
    auto c = plain_chunk("head tail");
    c.media_slots = {{"t", 1}, {"i", 1}};
    std::vector<MediaRecord> media = {{"[TAB_001]", "t", "d", "", "T", ""},
                                      {"[IMG_001]", "i", "d", "", "I", ""}};
    auto tagged = tag_chunk(c, media);
    CHECK(tagged.text == "head T [TAB_001] I [IMG_001] tail");
    CHECK(tagged.media_markers == std::vector<std::string>{"[TAB_001]", "[IMG_001]"});
    CHECK(scan_markers(tagged.text) == tagged.media_markers);
    try {
        tag_chunk(tagged, media);
        FAIL("re-tag accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AlreadyTagged);
    }
}

TEST_CASE("missing records are UnknownMedia") {
    auto c = plain_chunk("x");
    c.media_slots = {{"nope", 0}};
    try {
        tag_chunk(c, {});
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownMedia);
    }
}

TEST_CASE("records are numbered per document and per kind") {
    Document d;
    d.doc_name = "doc";
    Section s;
    s.level = 1;
    s.heading = "S";
    s.blocks = {Block::image("a", "first"), Block::table("b", {{"h"}}), Block::image("c", "second")};
    Section child;
    child.level = 2;
    child.heading = "T";
    child.blocks = {Block::table("e", {{"h"}, {"v"}})};
    s.children.push_back(child);
    d.root.children.push_back(s);
    auto records = build_media_records(d, StubDescriptionProvider{});
    REQUIRE(records.size() == 4);
    CHECK(records[0].marker == "[IMG_001]");
    CHECK(records[1].marker == "[TAB_001]");
    CHECK(records[2].marker == "[IMG_002]");
    CHECK(records[3].marker == "[TAB_002]");
    CHECK(records[0].caption == "first");
    for (const auto& r : records) {
        CHECK(r.doc_name == "doc");
        CHECK_FALSE(r.description.empty());
    }
}

TEST_CASE("registry resolution") {
    MediaRegistry reg;
    MediaRecord r{"[IMG_001]", "f", "d", "cap", "desc", "ref"};
    reg.add(r);
    CHECK_THROWS_AS(reg.add(r), Error);
    auto hit = resolve_markers({"[IMG_001]"}, reg, "d");
    REQUIRE(hit.records.size() == 1);
    CHECK(hit.records[0] == r);
    CHECK(resolve_markers({}, reg, "d").records.empty());
    auto miss = resolve_markers({"[IMG_999]"}, reg, "d");
    CHECK(miss.records.empty());
    CHECK(miss.unresolved == std::vector<std::string>{"[IMG_999]"});
    // same marker in another document is a different record
    CHECK(resolve_markers({"[IMG_001]"}, reg, "other").unresolved.size() == 1);
}

TEST_CASE("property: tagging preserves text and markers round-trip") {
    Rng rng(99);
    StubDescriptionProvider stub;
    testing::DocShape shape;
    shape.media_chance = 0.5;
    for (int i = 0; i < 200; ++i) {
        auto doc = testing::random_document(rng, "m" + std::to_string(i), shape);
        auto records = build_media_records(doc, stub);
        int images = 0, tables = 0;
        for (const auto& r : records) {
            int n = std::stoi(r.marker.substr(5, 3));
            CHECK(n == (r.is_image() ? ++images : ++tables));
        }
        ChunkingConfig cfg;
        cfg.s_max = static_cast<std::size_t>(rng.between(32, 200));
        for (const auto& c : chunk_document(doc, cfg)) {
            auto tagged = tag_chunk(c, records);
            CHECK(scan_markers(tagged.text) == tagged.media_markers);
            CHECK(tagged.media_markers.size() == c.media_slots.size());
            CHECK(is_subsequence(text::whitespace_tokens(c.text), text::whitespace_tokens(tagged.text)));
        }
    }
}
