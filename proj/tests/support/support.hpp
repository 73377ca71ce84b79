#pragma once

// Generators and reference implementations shared by the test binaries.
// The oracles are written from the formulas, not from the library code, so a
// shared bug cannot hide behind agreement.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "specrag/chunker.hpp"
#include "specrag/docmodel.hpp"
#include "specrag/index.hpp"
#include "specrag/providers.hpp"

namespace specrag::testing {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::size_t below(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_);
    }
    int between(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    double range(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    bool chance(double p) { return unit() < p; }

    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
};

/// Word from a small fixed vocabulary, so terms repeat across chunks.
std::string word(Rng& rng);
std::string words(Rng& rng, std::size_t n, std::string_view sep = " ");

SpecMetadata random_metadata(Rng& rng);

struct DocShape {
    int max_depth = 3;
    int max_children = 3;
    int max_paragraphs = 3;
    int max_paragraph_tokens = 120;
    double media_chance = 0.15;
};

/// Valid document with a random section tree, paragraphs and media blocks.
Document random_document(Rng& rng, const std::string& doc_name, const DocShape& shape = {});

/// Stand-alone chunks with unique ids, random text and random metadata.
std::vector<Chunk> random_chunks(Rng& rng, std::size_t n, const std::string& prefix = "c");

// ---------------------------------------------------------------------------
// Oracles

/// Lexical terms by regex: lowercase, [a-z0-9] runs, a '.' joins two runs
/// only when the left one ends in a digit. ASCII input only.
std::vector<std::string> oracle_terms(std::string_view text);

/// Textbook Okapi BM25 over an explicit collection of term lists.
double oracle_bm25(const std::vector<std::string>& query,
                   const std::vector<std::vector<std::string>>& collection, std::size_t doc,
                   double k1 = 1.2, double b = 0.75);

/// Full scan, cosine in double, sorted by score desc then id asc.
std::vector<ScoredId> brute_force_cosine(const std::vector<std::string>& ids,
                                         const std::vector<EmbeddingVector>& vectors,
                                         const EmbeddingVector& query, std::size_t k);

/// Filter rule written out directly: every constrained dimension must share
/// a value with the chunk; specifications compare on their digits, so
/// "23.558" matches "23558-i30".
bool oracle_metadata_match(const SpecMetadata& chunk, const std::vector<std::string>& release,
                           const std::vector<std::string>& series,
                           const std::vector<std::string>& specification);

/// Windows of size s advancing by s - floor(o * s) until the end is covered,
/// counted by walking the positions.
std::size_t oracle_window_count(std::size_t tokens, std::size_t s_max, double overlap);

// ---------------------------------------------------------------------------
// Files

/// Fresh directory under the system temp dir, removed by the destructor.
class TempDir {
  public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Source-tree directory holding the fixtures, set by the build.
std::filesystem::path source_dir();

}  // namespace specrag::testing
