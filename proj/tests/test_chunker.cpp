#include <doctest.h>

#include <map>
#include <set>

#include "specrag/chunker.hpp"
#include "specrag/error.hpp"
#include "specrag/text.hpp"
#include "support.hpp"

using namespace specrag;
using specrag::testing::Rng;

namespace {

std::string n_tokens(std::size_t n, const std::string& stem = "w") {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += stem + std::to_string(i);
    }
    return out;
}

Section section(int level, std::string heading, std::vector<std::string> paragraphs) {
    Section s;
    s.level = level;
    s.heading = std::move(heading);
    for (auto& p : paragraphs) s.blocks.push_back(Block::paragraph(std::move(p)));
    return s;
}

Document single(Section s, std::string name = "d") {
    Document d;
    d.doc_name = std::move(name);
    d.root.children.push_back(std::move(s));
    return d;
}

// Structural invariants that must hold for every chunking result.
void check_hierarchy(const std::vector<Chunk>& chunks, const Document& doc,
                     const ChunkingConfig& cfg) {
    std::map<std::string, const Chunk*> by_id;
    for (const auto& c : chunks) {
        REQUIRE(by_id.emplace(c.chunk_id, &c).second);
        CHECK(c.doc_name == doc.doc_name);
        CHECK(c.metadata == doc.metadata);
        CHECK(text::count_tokens(c.body()) <= cfg.s_max);
    }
    const std::string root = virtual_root_id(doc.doc_name);
    std::map<std::string, std::vector<int>> positions;
    for (const auto& c : chunks) {
        REQUIRE(c.parent_id.has_value());
        positions[*c.parent_id].push_back(c.position);
        // walking up strictly decreases level and ends at the virtual root
        const Chunk* cur = &c;
        std::size_t steps = 0;
        while (*cur->parent_id != root) {
            auto it = by_id.find(*cur->parent_id);
            REQUIRE(it != by_id.end());
            CHECK(it->second->level < cur->level);
            cur = it->second;
            REQUIRE(++steps <= chunks.size());
        }
        CHECK(cur->level >= 1);
    }
    for (auto& [parent, pos] : positions) {
        for (std::size_t i = 0; i < pos.size(); ++i) CHECK(pos[i] == static_cast<int>(i));
    }
}

}  // namespace

TEST_CASE("config validation") {
    ChunkingConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.overlap_tokens() == 102);
    CHECK(cfg.stride() == 410);
    cfg.s_max = 31;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.s_max = 64;
    cfg.overlap = 0.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.overlap = 0.2;
    cfg.token_counter = "bpe";
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("a section that fits is one chunk under the virtual root") {
    auto doc = single(section(1, "Intro", {n_tokens(100)}));
    auto chunks = chunk_document(doc, {});
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].level == 1);
    CHECK(chunks[0].position == 0);
    CHECK(chunks[0].parent_id == virtual_root_id("d"));
    CHECK(chunks[0].text == "Intro\n" + n_tokens(100));
    CHECK(chunks[0].body() == n_tokens(100));
    CHECK(chunks[0].heading_path == std::vector<std::string>{"Intro"});
}

TEST_CASE("an oversized preamble becomes sliding windows") {
    auto doc = single(section(1, "Long", {n_tokens(2000)}));
    ChunkingConfig cfg;
    auto chunks = chunk_document(doc, cfg);
    REQUIRE(chunks.size() == 5);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        auto toks = text::whitespace_tokens(chunks[i].body());
        CHECK(toks.front() == "w" + std::to_string(i * 410));
        CHECK(chunks[i].split_index == static_cast<int>(i));
        CHECK(chunks[i].split_count == 5);
        CHECK(chunks[i].position == static_cast<int>(i));
    }
    // consecutive windows share overlap_tokens tokens
    auto a = text::whitespace_tokens(chunks[0].body());
    auto b = text::whitespace_tokens(chunks[1].body());
    CHECK(std::vector<std::string>(a.end() - 102, a.end()) ==
          std::vector<std::string>(b.begin(), b.begin() + 102));
}

TEST_CASE("oversized section with small children") {
    Section s = section(1, "Parent", {n_tokens(60, "p")});
    for (int i = 0; i < 3; ++i) {
        s.children.push_back(section(2, "Child " + std::to_string(i), {n_tokens(200, "c")}));
    }
    auto doc = single(s);
    auto chunks = chunk_document(doc, {});
    REQUIRE(chunks.size() == 4);
    const auto& pre = chunks[0];
    CHECK(pre.heading_path == std::vector<std::string>{"Parent"});
    CHECK(pre.body() == n_tokens(60, "p"));
    for (int i = 0; i < 3; ++i) {
        const auto& c = chunks[static_cast<std::size_t>(i) + 1];
        CHECK(c.parent_id == pre.chunk_id);
        CHECK(c.position == i);
        CHECK(c.level == 2);
        CHECK(c.text.rfind("Parent > Child " + std::to_string(i) + "\n", 0) == 0);
    }
}

TEST_CASE("children attach to the nearest ancestor when the preamble is empty") {
    Section s = section(1, "Empty", {});
    s.children.push_back(section(2, "A", {n_tokens(300)}));
    s.children.push_back(section(2, "B", {n_tokens(300)}));
    auto chunks = chunk_document(single(s), {});
    REQUIRE(chunks.size() == 2);
    for (const auto& c : chunks) CHECK(c.parent_id == virtual_root_id("d"));
    CHECK(chunks[0].position == 0);
    CHECK(chunks[1].position == 1);
}

TEST_CASE("empty sections yield nothing and ids stay unique for repeated headings") {
    Document d;
    d.doc_name = "dup";
    d.root.children.push_back(section(1, "Same", {"one"}));
    d.root.children.push_back(section(1, "Same", {"two"}));
    d.root.children.push_back(section(1, "Nothing", {}));
    auto chunks = chunk_document(d, {});
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].chunk_id != chunks[1].chunk_id);
    CHECK(chunks[0].chunk_id == "dup::Same::0");
    CHECK(chunks[1].chunk_id == "dup::Same #2::0");
}

TEST_CASE("window count matches the stride walk") {
    Rng rng(77);
    for (int i = 0; i < 2000; ++i) {
        ChunkingConfig cfg;
        cfg.s_max = static_cast<std::size_t>(rng.between(32, 700));
        cfg.overlap = rng.range(0.0, 0.499);
        std::size_t tokens = rng.below(6000);
        CHECK(window_count(tokens, cfg) ==
              testing::oracle_window_count(tokens, cfg.s_max, cfg.overlap));
    }
    ChunkingConfig cfg;
    CHECK(window_count(2000, cfg) == 5);  // ceil((2000-512)/410)+1
}

TEST_CASE("fixed strategy ignores sections") {
    Document d;
    d.doc_name = "flat";
    d.root.children.push_back(section(1, "H1", {n_tokens(50, "a")}));
    d.root.children.push_back(section(1, "H2", {n_tokens(50, "b")}));
    ChunkingConfig cfg;
    cfg.s_max = 64;
    cfg.strategy = ChunkStrategy::Fixed;
    auto chunks = chunk_document(d, cfg);
    // 102 tokens including the two heading tokens, stride 52
    REQUIRE(chunks.size() == testing::oracle_window_count(102, 64, 0.2));
    CHECK(chunks[0].chunk_id == "flat::fixed::0");
    for (const auto& c : chunks) {
        CHECK(c.parent_id == virtual_root_id("flat"));
        CHECK(c.heading_path.empty());
        CHECK(text::count_tokens(c.text) <= 64);
    }
    CHECK(chunk_coverage(chunks, d).complete());
}

TEST_CASE("coverage detects a missing chunk and foreign chunks") {
    Section s = section(1, "S", {n_tokens(300, "x")});
    s.children.push_back(section(2, "T", {n_tokens(300, "y")}));
    auto doc = single(s);
    auto chunks = chunk_document(doc, {});
    auto full = chunk_coverage(chunks, doc);
    CHECK(full.complete());
    CHECK(full.document_tokens == 600);
    chunks.pop_back();
    CHECK_FALSE(chunk_coverage(chunks, doc).complete());
    chunks.back().doc_name = "other";
    CHECK_THROWS_AS(chunk_coverage(chunks, doc), Error);
}

TEST_CASE("media blocks are carried as slots without counting toward size") {
    Section s = section(1, "M", {"before the table"});
    s.blocks.push_back(Block::table("t1", {{"a", "b"}}));
    s.blocks.push_back(Block::paragraph("after"));
    auto chunks = chunk_document(single(s), {});
    REQUIRE(chunks.size() == 1);
    REQUIRE(chunks[0].media_slots.size() == 1);
    CHECK(chunks[0].media_slots[0] == MediaSlot{"t1", 3});
}

TEST_CASE("property: generated documents") {
    Rng rng(314159);
    testing::DocShape shape;
    shape.max_paragraph_tokens = 300;
    for (int i = 0; i < 300; ++i) {
        auto doc = testing::random_document(rng, "g" + std::to_string(i), shape);
        ChunkingConfig cfg;
        cfg.s_max = static_cast<std::size_t>(rng.between(32, 400));
        cfg.overlap = rng.range(0.0, 0.45);
        cfg.strategy = rng.chance(0.8) ? ChunkStrategy::Structural : ChunkStrategy::Fixed;
        auto chunks = chunk_document(doc, cfg);
        auto cov = chunk_coverage(chunks, doc);
        CHECK(cov.complete());
        check_hierarchy(chunks, doc, cfg);
        CHECK(chunk_document(doc, cfg) == chunks);
    }
}
