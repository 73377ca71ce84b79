#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#ifndef SPECRAG_SOURCE_DIR
#define SPECRAG_SOURCE_DIR "."
#endif

namespace specrag::testing {

namespace {

const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> v = {
        "session", "anchor", "relocation", "policy", "slice", "timer", "network",
        "function", "registration", "paging", "bearer", "context", "the", "a", "of",
        "is", "and", "to", "user", "plane", "control", "QoS", "flow", "NWDAF", "AMF",
        "SMF", "UPF", "edge", "server", "discovery", "23.558", "29.510", "R17", "R18",
        "release", "limit", "value", "cause", "reject", "accept", "device", "cell",
        "beam", "handover", "report", "interval", "seconds", "minutes", "5G", "LTE",
        "x1", "x2", "x3", "alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa"};
    return v;
}

void fill_section(Rng& rng, Section& s, int depth, const DocShape& shape, int& media_counter) {
    int paragraphs = rng.between(0, shape.max_paragraphs);
    for (int i = 0; i < paragraphs; ++i) {
        std::size_t n = static_cast<std::size_t>(rng.between(1, shape.max_paragraph_tokens));
        s.blocks.push_back(Block::paragraph(words(rng, n)));
        if (rng.chance(shape.media_chance)) {
            std::string id = "m" + std::to_string(++media_counter);
            if (rng.chance(0.5)) {
                TableCells cells;
                int rows = rng.between(1, 3), cols = rng.between(1, 3);
                for (int r = 0; r < rows; ++r) {
                    std::vector<std::string> row;
                    for (int c = 0; c < cols; ++c) row.push_back(word(rng));
                    cells.push_back(row);
                }
                s.blocks.push_back(Block::table(id, cells, rng.chance(0.5) ? words(rng, 3) : ""));
            } else {
                s.blocks.push_back(Block::image(id, words(rng, 4), "figures/" + id + ".png"));
            }
        }
    }
    if (depth >= shape.max_depth) return;
    int children = rng.between(0, shape.max_children);
    for (int i = 0; i < children; ++i) {
        Section c;
        c.level = s.level + rng.between(1, 2);
        c.heading = words(rng, static_cast<std::size_t>(rng.between(1, 4)));
        fill_section(rng, c, depth + 1, shape, media_counter);
        s.children.push_back(std::move(c));
    }
}

}  // namespace

std::string word(Rng& rng) { return rng.pick(vocabulary()); }

std::string words(Rng& rng, std::size_t n, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += sep;
        out += word(rng);
    }
    return out;
}

SpecMetadata random_metadata(Rng& rng) {
    SpecMetadata m;
    if (rng.chance(0.8)) {
        int r = rng.between(15, 19);
        m.release.push_back(std::to_string(r));
        if (rng.chance(0.2)) m.release.push_back(std::to_string(r + 1));
    }
    if (rng.chance(0.85)) {
        int series = rng.pick(std::vector<int>{23, 24, 29, 33, 38});
        int number = rng.between(100, 999);
        m.series = std::to_string(series);
        m.specification = std::to_string(series) + "." + std::to_string(number);
    }
    if (rng.chance(0.5)) m.version = Version{rng.between(10, 19), rng.between(0, 9), rng.between(0, 9)};
    return m;
}

Document random_document(Rng& rng, const std::string& doc_name, const DocShape& shape) {
    Document d;
    d.doc_name = doc_name;
    d.metadata = random_metadata(rng);
    d.root.level = 0;
    int media_counter = 0;
    if (rng.chance(0.3)) {
        d.root.blocks.push_back(Block::paragraph(
            words(rng, static_cast<std::size_t>(rng.between(1, shape.max_paragraph_tokens)))));
    }
    int top = rng.between(1, std::max(1, shape.max_children));
    for (int i = 0; i < top; ++i) {
        Section s;
        s.level = 1;
        s.heading = words(rng, static_cast<std::size_t>(rng.between(1, 4)));
        fill_section(rng, s, 1, shape, media_counter);
        d.root.children.push_back(std::move(s));
    }
    return d;
}

std::vector<Chunk> random_chunks(Rng& rng, std::size_t n, const std::string& prefix) {
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < n; ++i) {
        Chunk c;
        c.doc_name = prefix + "doc" + std::to_string(i % 7);
        c.chunk_id = c.doc_name + "::" + prefix + std::to_string(i);
        c.text = words(rng, static_cast<std::size_t>(rng.between(1, 40)));
        c.level = 1;
        c.parent_id = virtual_root_id(c.doc_name);
        c.position = static_cast<int>(i);
        c.metadata = random_metadata(rng);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<std::string> oracle_terms(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    static const std::regex term_re("([a-z0-9]*[0-9]\\.)*[a-z0-9]+");
    std::vector<std::string> out;
    for (std::sregex_iterator it(lower.begin(), lower.end(), term_re), end; it != end; ++it) {
        out.push_back(it->str());
    }
    return out;
}

double oracle_bm25(const std::vector<std::string>& query,
                   const std::vector<std::vector<std::string>>& collection, std::size_t doc,
                   double k1, double b) {
    const double n = static_cast<double>(collection.size());
    double total_len = 0;
    for (const auto& d : collection) total_len += static_cast<double>(d.size());
    const double avg = total_len / n;
    const auto& terms = collection[doc];
    double score = 0.0;
    for (const auto& q : query) {
        double df = 0;
        for (const auto& d : collection) {
            if (std::find(d.begin(), d.end(), q) != d.end()) df += 1;
        }
        double tf = static_cast<double>(std::count(terms.begin(), terms.end(), q));
        if (tf == 0 || df == 0) continue;
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        double len = static_cast<double>(terms.size());
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
    }
    return score;
}

std::vector<ScoredId> brute_force_cosine(const std::vector<std::string>& ids,
                                         const std::vector<EmbeddingVector>& vectors,
                                         const EmbeddingVector& query, std::size_t k) {
    std::vector<ScoredId> all;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double d = 0, na = 0, nb = 0;
        for (std::size_t j = 0; j < query.values.size(); ++j) {
            double a = vectors[i].values[j], q = query.values[j];
            d += a * q;
            na += a * a;
            nb += q * q;
        }
        double c = (na == 0 || nb == 0) ? 0.0 : d / (std::sqrt(na) * std::sqrt(nb));
        all.push_back({ids[i], c});
    }
    std::sort(all.begin(), all.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

namespace {

std::string spec_digits(const std::string& spec) {
    std::string out;
    for (char c : spec) {
        if (c == '.') continue;
        if (c < '0' || c > '9') break;
        out += c;
    }
    return out.size() >= 5 ? out.substr(0, 5) : std::string();
}

}  // namespace

bool oracle_metadata_match(const SpecMetadata& chunk, const std::vector<std::string>& release,
                           const std::vector<std::string>& series,
                           const std::vector<std::string>& specification) {
    if (!release.empty()) {
        bool any = false;
        for (const auto& r : chunk.release) {
            for (const auto& q : release) any = any || r == q;
        }
        if (!any) return false;
    }
    if (!series.empty()) {
        bool any = false;
        for (const auto& q : series) any = any || (!chunk.series.empty() && chunk.series == q);
        if (!any) return false;
    }
    if (!specification.empty()) {
        auto key = spec_digits(chunk.specification);
        bool any = false;
        for (const auto& q : specification) any = any || (!key.empty() && spec_digits(q) == key);
        if (!any) return false;
    }
    return true;
}

std::size_t oracle_window_count(std::size_t tokens, std::size_t s_max, double overlap) {
    std::size_t stride = s_max - static_cast<std::size_t>(std::floor(overlap * s_max));
    std::size_t count = 1;
    for (std::size_t start = 0; start + s_max < tokens; start += stride) ++count;
    return count;
}

TempDir::TempDir(const std::string& tag) {
    static std::random_device rd;
    auto base = std::filesystem::temp_directory_path();
    for (;;) {
        auto p = base / ("specrag-" + tag + "-" + std::to_string(rd()));
        if (std::filesystem::create_directory(p)) {
            path_ = p;
            break;
        }
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path source_dir() { return SPECRAG_SOURCE_DIR; }

}  // namespace specrag::testing
