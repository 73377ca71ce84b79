#include "specrag/providers.hpp"

#include <cmath>
#include <regex>
#include <set>

#include <json.hpp>

#include "specrag/error.hpp"
#include "specrag/querypipe.hpp"
#include "specrag/text.hpp"

namespace specrag {

double EmbeddingVector::norm() const { return std::sqrt(dot(*this, *this)); }

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::InvalidArgument, "dimension mismatch: " + std::to_string(a.dim()) +
                                                    " vs " + std::to_string(b.dim()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        s += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
    }
    return s;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

std::string generate(const GenerationRequest& request, const GenerationProvider& provider) {
    if (text::trim(request.prompt).empty()) {
        throw ProviderError(ProviderFailure::Precondition, "generation prompt is empty");
    }
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
        throw ProviderError(ProviderFailure::Precondition, "temperature outside [0, 2]");
    }
    if (request.max_output_tokens <= 0) {
        throw ProviderError(ProviderFailure::Precondition, "max_output_tokens must be positive");
    }
    for (const auto& a : request.attachments) {
        if (!a.is_image()) {
            throw ProviderError(ProviderFailure::Precondition,
                                "attachment " + a.marker + " is not an image");
        }
    }
    return provider.complete(request);
}

EmbeddingVector embed(std::string_view text, const EmbeddingProvider& provider) {
    if (text::trim(text).empty()) {
        throw ProviderError(ProviderFailure::Precondition, "cannot embed empty text");
    }
    EmbeddingVector v = provider.encode(text);
    if (v.dim() != provider.dim()) {
        throw ProviderError(ProviderFailure::BadResponse,
                            "provider returned dim " + std::to_string(v.dim()) + ", expected " +
                                std::to_string(provider.dim()));
    }
    double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ProviderError(ProviderFailure::BadResponse, "embedding has zero or non-finite norm");
    }
    if (std::abs(n - 1.0) > 1e-7) {
        for (auto& x : v.values) x = static_cast<float>(static_cast<double>(x) / n);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Stub generation

namespace {

// Body of the last <tag>...</tag> block that ends before `limit`.
std::optional<std::string> last_block(std::string_view s, std::string_view tag,
                                      std::size_t limit = std::string_view::npos) {
    const std::string open = "<" + std::string(tag) + ">\n";
    const std::string close = "\n</" + std::string(tag) + ">";
    auto c = s.rfind(close, limit);
    if (c == std::string_view::npos) return std::nullopt;
    auto o = s.rfind(open, c);
    if (o == std::string_view::npos) return std::nullopt;
    return std::string(s.substr(o + open.size(), c - o - open.size()));
}

std::string stub_plan(std::string_view query) {
    std::vector<std::string> subs;
    for (auto& s : text::sentences(query)) subs.push_back(std::move(s));
    if (subs.size() <= 1) subs = {text::trim(query)};
    nlohmann::ordered_json j;
    j["sub_queries"] = subs;
    return j.dump();
}

std::string stub_metadata(std::string_view query) {
    auto meta = extract_metadata_rules(query);
    nlohmann::ordered_json j;
    auto list = [](const std::vector<std::string>& v) {
        return v.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
    };
    j["release"] = list(meta.release);
    j["series"] = list(meta.series);
    j["specification"] = list(meta.specification);
    return j.dump();
}

std::string stub_answer(std::string_view prompt) {
    auto context_close = prompt.rfind("\n</context>");
    auto context = last_block(prompt, "context");
    std::size_t context_open =
        context ? prompt.rfind("<context>\n", context_close) : std::string_view::npos;
    auto question = last_block(prompt, "question", context_open);
    if (!question) return "<answer></answer><docs></docs>";

    const auto question_words = text::content_words(*question);
    std::vector<std::string> docs;
    std::vector<std::string> picked;
    std::set<std::string> seen;
    if (context) {
        static const std::regex doc_re(R"re(doc_name="([^"]*)")re");
        std::istringstream in(*context);
        std::string line;
        std::string body;
        auto flush = [&] {
            for (auto& sentence : text::sentences(body)) {
                auto words = text::content_words(sentence);
                bool shares = std::any_of(words.begin(), words.end(), [&](const std::string& w) {
                    return question_words.count(w) > 0;
                });
                if (shares && seen.insert(sentence).second) picked.push_back(sentence);
            }
            body.clear();
        };
        while (std::getline(in, line)) {
            if (line.rfind("<chunk ", 0) == 0 || line.rfind("</chunk>", 0) == 0) {
                flush();
                std::smatch m;
                if (std::regex_search(line, m, doc_re) &&
                    std::find(docs.begin(), docs.end(), m[1].str()) == docs.end()) {
                    docs.push_back(m[1].str());
                }
                continue;
            }
            body += line;
            body += '\n';
        }
        flush();
    }
    return "<answer>" + text::join(picked, " ") + "</answer><docs>" + text::join(docs, ", ") +
           "</docs>";
}

}  // namespace

std::string StubGenerationProvider::complete(const GenerationRequest& request) const {
    const std::string_view prompt = request.prompt;
    if (prompt.find("Parse a 3GPP query to extract the three entities") != std::string_view::npos) {
        return stub_metadata(last_block(prompt, "query").value_or(""));
    }
    if (prompt.find("\"sub_queries\"") != std::string_view::npos) {
        return stub_plan(last_block(prompt, "query").value_or(""));
    }
    return stub_answer(prompt);
}

// ---------------------------------------------------------------------------
// Stub embedding

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dim, std::uint64_t bucket_seed,
                                                   std::uint64_t sign_seed)
    : dim_(dim), bucket_seed_(bucket_seed), sign_seed_(sign_seed) {
    if (dim_ == 0) throw Error(ErrorCode::ConfigError, "embedding dim must be positive");
}

std::string HashingEmbeddingProvider::fingerprint() const {
    return "hashing:dim=" + std::to_string(dim_) + ":bucket_seed=" + std::to_string(bucket_seed_) +
           ":sign_seed=" + std::to_string(sign_seed_);
}

EmbeddingVector HashingEmbeddingProvider::encode(std::string_view input) const {
    auto tokens = text::terms(input);
    if (tokens.empty()) {
        auto whole = text::to_lower(text::trim(input));
        if (whole.empty()) {
            throw ProviderError(ProviderFailure::Precondition, "cannot embed empty text");
        }
        tokens.push_back(std::move(whole));
    }
    std::vector<double> acc(dim_, 0.0);
    for (const auto& t : tokens) {
        auto bucket = text::fnv1a64(t, bucket_seed_) % dim_;
        bool negative = (text::fnv1a64(t, sign_seed_) >> 63) != 0;
        acc[bucket] += negative ? -1.0 : 1.0;
    }
    double n = 0.0;
    for (double x : acc) n += x * x;
    n = std::sqrt(n);
    EmbeddingVector v;
    v.values.resize(dim_);
    if (n == 0.0) {
        // every term cancelled out; fall back to the first term's bucket
        v.values[text::fnv1a64(tokens.front(), bucket_seed_) % dim_] = 1.0F;
        return v;
    }
    for (std::size_t i = 0; i < dim_; ++i) v.values[i] = static_cast<float>(acc[i] / n);
    return v;
}

// ---------------------------------------------------------------------------
// Stub descriptions

std::string StubDescriptionProvider::describe_table(const Block& table) const {
    if (!table.table_cells || table.table_cells->empty() || table.table_cells->front().empty()) {
        throw ProviderError(ProviderFailure::EmptyMedia, "table has no cells");
    }
    const auto& cells = *table.table_cells;
    std::string out = "table with " + std::to_string(cells.size()) + " rows and " +
                      std::to_string(cells.front().size()) + " columns; headers: " +
                      text::join(cells.front(), ", ");
    if (cells.size() > 1) out += "; first row: " + text::join(cells[1], ", ");
    return out;
}

std::string StubDescriptionProvider::describe_image(const Block& image) const {
    std::string out = "figure " + image.media_id.value_or("?");
    if (!image.caption.empty()) out += ": " + image.caption;
    return out;
}

}  // namespace specrag
