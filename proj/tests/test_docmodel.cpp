#include <doctest.h>

#include "specrag/docmodel.hpp"
#include "specrag/error.hpp"
#include "support.hpp"

using namespace specrag;
using specrag::testing::Rng;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an exception");
    return ErrorCode::InvalidArgument;
}

void check_levels(const Section& s) {
    for (const auto& c : s.children) {
        CHECK(c.level > s.level);
        CHECK_FALSE(c.heading.empty());
        check_levels(c);
    }
}

}  // namespace

TEST_CASE("file-name identifier") {
    auto m = parse_spec_identifier("23548-i30");
    CHECK(m.specification == "23548-i30");
    CHECK(m.series == "23");
    CHECK(m.release.empty());
    CHECK_FALSE(m.version.has_value());
}

TEST_CASE("identifier with version and release tokens") {
    auto m = parse_spec_identifier("23548-i30 V18.3.0 R18");
    CHECK(m.specification == "23548-i30");
    CHECK(m.series == "23");
    CHECK(m.release == std::vector<std::string>{"18"});
    REQUIRE(m.version.has_value());
    CHECK(*m.version == Version{18, 3, 0});
}

TEST_CASE("dotted identifier forms") {
    auto m = parse_spec_identifier("23.588.h00");
    CHECK(m.specification == "23.588.h00");
    CHECK(m.series == "23");

    auto v = parse_spec_identifier("V18.3.0");
    REQUIRE(v.version.has_value());
    CHECK(v.version->to_string() == "V18.3.0");
    CHECK(v.specification.empty());
}

TEST_CASE("identifiers that determine nothing are rejected") {
    CHECK(code_of([] { parse_spec_identifier(""); }) == ErrorCode::MalformedIdentifier);
    CHECK(code_of([] { parse_spec_identifier("overview"); }) == ErrorCode::MalformedIdentifier);
}

TEST_CASE("re-parsing the specification field is stable") {
    for (const char* raw : {"23548-i30", "23.588.h00 V18.1.0", "29510-h40 R17", "33.501"}) {
        auto first = parse_spec_identifier(raw);
        auto again = parse_spec_identifier(first.specification);
        CHECK(again.specification == first.specification);
        CHECK(again.series == first.series);
    }
}

TEST_CASE("version codes decode letters from 10") {
    CHECK(decode_version_code("i30") == Version{18, 3, 0});
    CHECK(decode_version_code("a00") == Version{10, 0, 0});
    CHECK(decode_version_code("930") == Version{9, 3, 0});
    CHECK_FALSE(decode_version_code("i3").has_value());
    CHECK_FALSE(decode_version_code("i-0").has_value());
}

TEST_CASE("version text round-trips") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        Version v{rng.between(0, 40), rng.between(0, 40), rng.between(0, 40)};
        auto back = parse_version(v.to_string());
        REQUIRE(back.has_value());
        CHECK(*back == v);
    }
    CHECK(parse_version("18.3.0") == Version{18, 3, 0});
    CHECK_FALSE(parse_version("V18.3").has_value());
}

TEST_CASE("specification keys drop punctuation and version suffix") {
    CHECK(specification_key("23.558") == "23558");
    CHECK(specification_key("23548-i30") == "23548");
    CHECK(specification_key("23.588.h00") == "23588");
    CHECK(specification_key("none").empty());
}

TEST_CASE("markdown nesting follows heading depth") {
    auto d = parse_markdown("# Top\n\nintro text\n\n## One\n\nfirst\n\n## Two\n\nsecond\n", "doc");
    REQUIRE(d.root.children.size() == 1);
    const auto& top = d.root.children[0];
    CHECK(top.level == 1);
    CHECK(top.heading == "Top");
    REQUIRE(top.blocks.size() == 1);
    CHECK(top.blocks[0].text == "intro text");
    REQUIRE(top.children.size() == 2);
    CHECK(top.children[0].level == 2);
    CHECK(top.children[1].heading == "Two");
}

TEST_CASE("markdown minimal document") {
    auto d = parse_markdown("# Only\n\nOne paragraph.\n", "23501-h00");
    REQUIRE(d.root.children.size() == 1);
    REQUIRE(d.root.children[0].blocks.size() == 1);
    CHECK(d.root.children[0].blocks[0].kind == BlockKind::Paragraph);
    CHECK(d.metadata.specification == "23501-h00");
}

TEST_CASE("markdown front matter and media fences") {
    const char* md =
        "---\ndoc_name: custom\nspecification: 23.501\nrelease: R17, 18\nversion: V17.2.0\n---\n"
        "# Title\n\n"
        "```media:table id=t1 caption=\"Limits\"\n| A | B |\n|---|---|\n| 1 | 2 |\n```\n\n"
        "```media:image id=f1 caption=\"Architecture\" ref=figs/a.png\n```\n";
    auto d = parse_markdown(md, "fallback");
    CHECK(d.doc_name == "custom");
    CHECK(d.metadata.specification == "23.501");
    CHECK(d.metadata.series == "23");
    CHECK(d.metadata.release == std::vector<std::string>{"17", "18"});
    CHECK(d.metadata.version == Version{17, 2, 0});
    const auto& blocks = d.root.children.at(0).blocks;
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].kind == BlockKind::Table);
    CHECK(blocks[0].media_id == std::optional<std::string>("t1"));
    CHECK(*blocks[0].table_cells == TableCells{{"A", "B"}, {"1", "2"}});
    CHECK(blocks[0].caption == "Limits");
    CHECK(blocks[1].kind == BlockKind::Image);
    CHECK(blocks[1].content_ref == std::optional<std::string>("figs/a.png"));
}

TEST_CASE("markdown errors carry the line number") {
    try {
        parse_markdown("# A\n\n```media:table id=t\n| a | b |\n| 1 |\n```\n", "d", "bad.md");
        FAIL("ragged table accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("bad.md:5") != std::string::npos);
    }
    CHECK(code_of([] { parse_markdown("# A\n```media:image caption=x\n```\n", "d"); }) ==
          ErrorCode::ParseError);
    CHECK(code_of([] { parse_markdown("# A\n```\nopen fence\n", "d"); }) == ErrorCode::ParseError);
}

TEST_CASE("validate rejects structural violations") {
    Document d;
    d.doc_name = "x";
    Section s;
    s.level = 1;
    s.heading = "ok";
    Section child;
    child.level = 1;
    child.heading = "same level";
    s.children.push_back(child);
    d.root.children.push_back(s);
    CHECK(code_of([&] { validate(d); }) == ErrorCode::ParseError);

    d.root.children[0].children.clear();
    d.root.children[0].heading = "";
    CHECK(code_of([&] { validate(d); }) == ErrorCode::ParseError);

    d.root.children[0].heading = "ok";
    d.root.children[0].blocks.push_back(Block::image("m", "a"));
    d.root.children[0].blocks.push_back(Block::table("m", {{"a"}}));
    CHECK(code_of([&] { validate(d); }) == ErrorCode::ParseError);

    d.root.children[0].blocks = {Block::table("t", {{"a", "b"}, {"c"}})};
    CHECK(code_of([&] { validate(d); }) == ErrorCode::ParseError);

    Block p = Block::paragraph("text");
    p.media_id = "stray";
    d.root.children[0].blocks = {p};
    CHECK(code_of([&] { validate(d); }) == ErrorCode::ParseError);
}

TEST_CASE("canonical round-trip on generated documents") {
    Rng rng(20240611);
    for (int i = 0; i < 200; ++i) {
        auto doc = testing::random_document(rng, "doc" + std::to_string(i));
        auto text = to_canonical(doc);
        auto back = parse_canonical(text);
        REQUIRE(back == doc);
        CHECK(to_canonical(back) == text);
        check_levels(back.root);
    }
}

TEST_CASE("canonical files round-trip byte for byte") {
    testing::TempDir dir("docmodel");
    Rng rng(5);
    auto doc = testing::random_document(rng, "23548-i30");
    save_document(doc, dir / "a.json");
    auto loaded = load_document(dir / "a.json");
    CHECK(loaded == doc);
    save_document(loaded, dir / "b.json");
    CHECK(testing::read_file(dir / "a.json") == testing::read_file(dir / "b.json"));
}

TEST_CASE("document without sections keeps its metadata header") {
    Document d;
    d.doc_name = "empty";
    d.metadata = parse_spec_identifier("23548-i30 V18.3.0 R18");
    auto text = to_canonical(d);
    auto back = parse_canonical(text);
    CHECK(back == d);
    CHECK(back.root.children.empty());
}

TEST_CASE("image blocks keep id and content handle") {
    Document d;
    d.doc_name = "img";
    Section s;
    s.level = 1;
    s.heading = "Figures";
    s.blocks.push_back(Block::image("fig-1", "Overview", "blobs/fig-1.png"));
    d.root.children.push_back(s);
    auto back = parse_canonical(to_canonical(d));
    const auto& b = back.root.children[0].blocks[0];
    CHECK(b.media_id == std::optional<std::string>("fig-1"));
    CHECK(b.content_ref == std::optional<std::string>("blobs/fig-1.png"));
}

TEST_CASE("canonical parse errors") {
    CHECK(code_of([] { parse_canonical("{not json"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_canonical("[]"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_canonical(R"({"format":"specdoc","schema_version":99})"); }) ==
          ErrorCode::ParseError);
}

TEST_CASE("format detection and missing files") {
    CHECK(detect_format("a/b.json") == DocFormat::Canonical);
    CHECK(detect_format("a/b.md") == DocFormat::Markdown);
    CHECK(code_of([] { load_document("/nonexistent/x.md"); }) == ErrorCode::IoError);
}

TEST_CASE("corpus keys are unique") {
    Corpus c;
    Document d;
    d.doc_name = "one";
    c.add(d);
    CHECK(c.find("one") != nullptr);
    CHECK(c.find("two") == nullptr);
    CHECK(code_of([&] { c.add(d); }) == ErrorCode::DuplicateDocName);
    CHECK(c.size() == 1);
}
