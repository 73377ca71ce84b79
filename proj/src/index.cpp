#include "specrag/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <zlib.h>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

double bm25_term(double tf, double df, double n_docs, double len, double avg_len, double k1,
                 double b) {
    if (tf <= 0.0 || df <= 0.0) return 0.0;
    double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg_len));
}

HybridIndex::HybridIndex(double k1, double b) {
    require(k1 >= 0.0, "k1 must be non-negative");
    require(b >= 0.0 && b <= 1.0, "b must lie in [0,1]");
    stats_.k1 = k1;
    stats_.b = b;
}

void HybridIndex::add_chunks(const std::vector<Chunk>& chunks, const EmbeddingProvider& embedder) {
    if (sealed_) throw Error(ErrorCode::IndexSealed, "index is sealed");
    if (!fingerprint_.empty() && embedder.fingerprint() != fingerprint_) {
        throw Error(ErrorCode::InvalidArgument, "embedder '" + embedder.fingerprint() +
                                                    "' does not match index embedder '" +
                                                    fingerprint_ + "'");
    }
    std::set<std::string, std::less<>> batch;
    for (const auto& c : chunks) {
        if (by_id_.count(c.chunk_id) || !batch.insert(c.chunk_id).second) {
            throw Error(ErrorCode::DuplicateChunkId, c.chunk_id);
        }
    }
    std::vector<IndexedChunk> staged;
    staged.reserve(chunks.size());
    for (const auto& c : chunks) {
        IndexedChunk e;
        e.chunk = c;
        e.vector = embed(c.text, embedder);
        for (auto& t : text::terms(c.text)) {
            ++e.term_freqs[t];
            ++e.length;
        }
        staged.push_back(std::move(e));
    }
    if (chunks_.empty() && fingerprint_.empty()) {
        fingerprint_ = embedder.fingerprint();
        dim_ = embedder.dim();
    }
    for (auto& e : staged) insert(std::move(e));
    recompute_avg_len();
}

void HybridIndex::insert(IndexedChunk entry) {
    std::size_t pos = chunks_.size();
    for (const auto& [term, tf] : entry.term_freqs) {
        postings_[term].emplace_back(pos, tf);
        ++stats_.doc_freq[term];
    }
    total_len_ += entry.length;
    by_id_.emplace(entry.chunk.chunk_id, pos);
    chunks_.push_back(std::move(entry));
    stats_.doc_count = chunks_.size();
}

void HybridIndex::recompute_avg_len() {
    stats_.avg_len = chunks_.empty() ? 0.0
                                     : static_cast<double>(total_len_) /
                                           static_cast<double>(chunks_.size());
}

void HybridIndex::add_media(const MediaRecord& record) {
    if (sealed_) throw Error(ErrorCode::IndexSealed, "index is sealed");
    media_.add(record);
}

const IndexedChunk* HybridIndex::find(std::string_view chunk_id) const {
    auto it = by_id_.find(chunk_id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const IndexedChunk& HybridIndex::at(std::string_view chunk_id) const {
    const auto* c = find(chunk_id);
    if (!c) throw Error(ErrorCode::UnknownChunk, std::string(chunk_id));
    return *c;
}

double HybridIndex::bm25(const std::vector<std::string>& query_terms,
                         std::string_view chunk_id) const {
    const auto& c = at(chunk_id);
    double score = 0.0;
    double n = static_cast<double>(stats_.doc_count);
    for (const auto& t : query_terms) {
        auto tf = c.term_freqs.find(t);
        if (tf == c.term_freqs.end()) continue;
        double df = static_cast<double>(stats_.doc_freq.at(t));
        score += bm25_term(tf->second, df, n, static_cast<double>(c.length), stats_.avg_len,
                           stats_.k1, stats_.b);
    }
    return score;
}

namespace {

void rank(std::vector<ScoredId>& scored, std::size_t k) {
    auto better = [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    };
    if (k < scored.size()) {
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                          scored.end(), better);
        scored.resize(k);
    } else {
        std::sort(scored.begin(), scored.end(), better);
    }
}

}  // namespace

std::vector<ScoredId> HybridIndex::lexical_topk(const std::vector<std::string>& query_terms,
                                                std::size_t k, const ChunkFilter& filter) const {
    if (k == 0) return {};
    // Accumulate in query-term order so scores match bm25() bit for bit.
    std::vector<double> acc(chunks_.size(), 0.0);
    std::vector<char> touched(chunks_.size(), 0);
    double n = static_cast<double>(stats_.doc_count);
    for (const auto& t : query_terms) {
        auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        double df = static_cast<double>(it->second.size());
        for (const auto& [pos, tf] : it->second) {
            acc[pos] += bm25_term(tf, df, n, static_cast<double>(chunks_[pos].length),
                                  stats_.avg_len, stats_.k1, stats_.b);
            touched[pos] = 1;
        }
    }
    std::vector<ScoredId> scored;
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        if (!touched[i] || acc[i] <= 0.0) continue;
        if (filter && !filter(chunks_[i].chunk)) continue;
        scored.push_back({chunks_[i].chunk.chunk_id, acc[i]});
    }
    rank(scored, k);
    return scored;
}

std::vector<ScoredId> HybridIndex::dense_topk(const EmbeddingVector& query, std::size_t k,
                                              const ChunkFilter& filter) const {
    if (chunks_.empty()) throw Error(ErrorCode::EmptyIndex, "dense search over an empty index");
    if (query.dim() != dim_) {
        throw Error(ErrorCode::InvalidArgument, "query dim " + std::to_string(query.dim()) +
                                                    " != index dim " + std::to_string(dim_));
    }
    if (k == 0) return {};
    std::vector<ScoredId> scored;
    scored.reserve(chunks_.size());
    for (const auto& c : chunks_) {
        if (filter && !filter(c.chunk)) continue;
        scored.push_back({c.chunk.chunk_id, cosine(query, c.vector)});
    }
    rank(scored, k);
    return scored;
}

std::vector<DocumentEntry> HybridIndex::documents() const {
    std::vector<DocumentEntry> out;
    std::map<std::string, std::size_t> pos;
    for (const auto& c : chunks_) {
        auto [it, fresh] = pos.emplace(c.chunk.doc_name, out.size());
        if (fresh) out.push_back({c.chunk.doc_name, c.chunk.metadata, {}});
        out[it->second].chunk_ids.push_back(c.chunk.chunk_id);
    }
    return out;
}

std::vector<std::string> HybridIndex::doc_names() const {
    std::vector<std::string> out;
    for (auto& d : documents()) out.push_back(d.doc_name);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
//
// Segment file: "SRAG" | u32 schema | u32 kind | u64 payload length |
//               u32 crc32(payload) | payload. All integers little-endian.

namespace {

constexpr char kMagic[4] = {'S', 'R', 'A', 'G'};
constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8 + 4;

enum class Segment : std::uint32_t { Chunks = 1, Postings = 2, Vectors = 3, Media = 4 };

const char* segment_file(Segment s) {
    switch (s) {
        case Segment::Chunks: return "chunks.bin";
        case Segment::Postings: return "postings.bin";
        case Segment::Vectors: return "vectors.bin";
        case Segment::Media: return "media.bin";
    }
    return "";
}

class Writer {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(std::string_view s) {
        u64(s.size());
        buf_.append(s);
    }
    void strs(const std::vector<std::string>& v) {
        u64(v.size());
        for (const auto& s : v) str(s);
    }
    const std::string& bytes() const { return buf_; }

  private:
    std::string buf_;
};

class Reader {
  public:
    Reader(std::string_view data, std::string name) : data_(data), name_(std::move(name)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
        return v;
    }
    std::uint64_t u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        auto n = u64();
        return std::string(take(n));
    }
    std::vector<std::string> strs() {
        auto n = count();
        std::vector<std::string> v;
        for (std::uint64_t i = 0; i < n; ++i) v.push_back(str());
        return v;
    }
    // Element counts are bounded by the remaining bytes so a corrupt length
    // cannot trigger a huge allocation.
    std::uint64_t count() {
        auto n = u64();
        if (n > data_.size() - pos_) fail("element count out of range");
        return n;
    }
    bool done() const { return pos_ == data_.size(); }
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::ChecksumError, name_ + ": " + what);
    }

  private:
    std::string_view take(std::uint64_t n) {
        if (n > data_.size() - pos_) fail("unexpected end of segment");
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    std::string name_;
};

std::uint32_t crc_of(std::string_view bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::uint32_t write_segment(const std::filesystem::path& dir, Segment kind,
                            const std::string& payload) {
    Writer h;
    for (char c : kMagic) h.u8(static_cast<std::uint8_t>(c));
    h.u32(kIndexSchemaVersion);
    h.u32(static_cast<std::uint32_t>(kind));
    h.u64(payload.size());
    std::uint32_t crc = crc_of(payload);
    h.u32(crc);
    auto path = dir / segment_file(kind);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(h.bytes().data(), static_cast<std::streamsize>(h.bytes().size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    return crc;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string read_segment(const std::filesystem::path& dir, Segment kind,
                         std::uint32_t expected_crc) {
    auto path = dir / segment_file(kind);
    std::string raw = read_file(path);
    Reader r(raw, path.filename().string());
    if (raw.size() < kHeaderSize) r.fail("truncated header");
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) r.fail("bad magic");
    }
    auto schema = r.u32();
    if (schema != kIndexSchemaVersion) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    path.string() + ": schema " + std::to_string(schema) + ", expected " +
                        std::to_string(kIndexSchemaVersion));
    }
    if (r.u32() != static_cast<std::uint32_t>(kind)) r.fail("segment kind mismatch");
    auto len = r.u64();
    auto crc = r.u32();
    if (raw.size() - kHeaderSize != len) r.fail("payload length mismatch (truncated?)");
    std::string payload = raw.substr(kHeaderSize);
    if (crc_of(payload) != crc || crc != expected_crc) r.fail("crc32 mismatch");
    return payload;
}

void write_metadata(Writer& w, const SpecMetadata& m) {
    w.strs(m.release);
    w.str(m.series);
    w.str(m.specification);
    w.u8(m.version ? 1 : 0);
    if (m.version) {
        w.i32(m.version->major);
        w.i32(m.version->technical);
        w.i32(m.version->editorial);
    }
}

SpecMetadata read_metadata(Reader& r) {
    SpecMetadata m;
    m.release = r.strs();
    m.series = r.str();
    m.specification = r.str();
    if (r.u8()) {
        Version v;
        v.major = r.i32();
        v.technical = r.i32();
        v.editorial = r.i32();
        m.version = v;
    }
    return m;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::map<std::string, std::string> HybridIndex::manifest() const {
    std::size_t postings = 0;
    for (const auto& [t, list] : postings_) postings += list.size();
    return {
        {"schema_version", std::to_string(kIndexSchemaVersion)},
        {"dim", std::to_string(dim_)},
        {"embedder", fingerprint_},
        {"bm25_k1", fmt_double(stats_.k1)},
        {"bm25_b", fmt_double(stats_.b)},
        {"chunk_count", std::to_string(chunks_.size())},
        {"doc_count", std::to_string(documents().size())},
        {"term_count", std::to_string(postings_.size())},
        {"posting_count", std::to_string(postings)},
        {"media_count", std::to_string(media_.size())},
        {"sealed", sealed_ ? "true" : "false"},
    };
}

void HybridIndex::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

    Writer chunks;
    chunks.u64(chunks_.size());
    for (const auto& e : chunks_) {
        const Chunk& c = e.chunk;
        chunks.str(c.chunk_id);
        chunks.str(c.doc_name);
        chunks.str(c.text);
        chunks.strs(c.heading_path);
        chunks.i32(c.level);
        chunks.u8(c.parent_id ? 1 : 0);
        if (c.parent_id) chunks.str(*c.parent_id);
        chunks.i32(c.position);
        write_metadata(chunks, c.metadata);
        chunks.strs(c.media_markers);
        chunks.u64(c.media_slots.size());
        for (const auto& s : c.media_slots) {
            chunks.str(s.media_id);
            chunks.u64(s.token_index);
        }
        chunks.u64(c.body_offset);
        chunks.i32(c.split_index);
        chunks.i32(c.split_count);
        chunks.u64(e.length);
    }

    Writer postings;
    postings.u64(postings_.size());
    for (const auto& [term, list] : postings_) {
        postings.str(term);
        postings.u64(list.size());
        for (const auto& [pos, tf] : list) {
            postings.u64(pos);
            postings.u32(tf);
        }
    }

    Writer vectors;
    vectors.u64(chunks_.size());
    vectors.u64(dim_);
    for (const auto& e : chunks_) {
        for (float f : e.vector.values) vectors.f32(f);
    }

    Writer media;
    auto records = media_.records();
    media.u64(records.size());
    for (const auto& m : records) {
        media.str(m.marker);
        media.str(m.media_id);
        media.str(m.doc_name);
        media.str(m.caption);
        media.str(m.description);
        media.str(m.content_ref);
    }

    auto m = manifest();
    m["crc32_chunks"] = std::to_string(write_segment(dir, Segment::Chunks, chunks.bytes()));
    m["crc32_postings"] = std::to_string(write_segment(dir, Segment::Postings, postings.bytes()));
    m["crc32_vectors"] = std::to_string(write_segment(dir, Segment::Vectors, vectors.bytes()));
    m["crc32_media"] = std::to_string(write_segment(dir, Segment::Media, media.bytes()));

    std::string body = "# specrag index manifest\n";
    for (const auto& [k, v] : m) body += k + "=" + v + "\n";
    body += "manifest_crc32=" + std::to_string(crc_of(body)) + "\n";
    std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest in " + dir.string());
}

HybridIndex HybridIndex::load(const std::filesystem::path& dir) {
    auto manifest_path = dir / "manifest.txt";
    if (!std::filesystem::exists(manifest_path)) {
        throw Error(ErrorCode::IoError, "no index at " + dir.string());
    }
    std::string raw = read_file(manifest_path);
    auto crc_at = raw.rfind("manifest_crc32=");
    if (crc_at == std::string::npos || raw.empty() || raw.back() != '\n') {
        throw Error(ErrorCode::ChecksumError, "manifest.txt: missing checksum line");
    }
    std::string body = raw.substr(0, crc_at);
    std::string stored = text::trim(std::string_view(raw).substr(crc_at + 15));
    if (stored != std::to_string(crc_of(body))) {
        throw Error(ErrorCode::ChecksumError, "manifest.txt: crc32 mismatch");
    }
    std::map<std::string, std::string> kv;
    std::istringstream lines(body);
    for (std::string line; std::getline(lines, line);) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw Error(ErrorCode::ChecksumError, "manifest.txt: missing " + key);
        return it->second;
    };
    auto get_u = [&](const std::string& key) -> std::uint64_t {
        try {
            return std::stoull(get(key));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::ChecksumError, "manifest.txt: bad value for " + key);
        }
    };
    if (get("schema_version") != std::to_string(kIndexSchemaVersion)) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    "index schema " + get("schema_version") + ", expected " +
                        std::to_string(kIndexSchemaVersion));
    }

    HybridIndex idx(std::strtod(get("bm25_k1").c_str(), nullptr),
                    std::strtod(get("bm25_b").c_str(), nullptr));
    idx.dim_ = get_u("dim");
    idx.fingerprint_ = get("embedder");

    std::string chunk_bytes =
        read_segment(dir, Segment::Chunks, static_cast<std::uint32_t>(get_u("crc32_chunks")));
    std::string posting_bytes =
        read_segment(dir, Segment::Postings, static_cast<std::uint32_t>(get_u("crc32_postings")));
    std::string vector_bytes =
        read_segment(dir, Segment::Vectors, static_cast<std::uint32_t>(get_u("crc32_vectors")));
    std::string media_bytes =
        read_segment(dir, Segment::Media, static_cast<std::uint32_t>(get_u("crc32_media")));

    Reader cr(chunk_bytes, "chunks.bin");
    auto n = cr.count();
    std::vector<IndexedChunk> entries(n);
    for (auto& e : entries) {
        Chunk& c = e.chunk;
        c.chunk_id = cr.str();
        c.doc_name = cr.str();
        c.text = cr.str();
        c.heading_path = cr.strs();
        c.level = cr.i32();
        if (cr.u8()) c.parent_id = cr.str();
        c.position = cr.i32();
        c.metadata = read_metadata(cr);
        c.media_markers = cr.strs();
        auto slots = cr.count();
        for (std::uint64_t i = 0; i < slots; ++i) {
            MediaSlot s;
            s.media_id = cr.str();
            s.token_index = cr.u64();
            c.media_slots.push_back(std::move(s));
        }
        c.body_offset = cr.u64();
        c.split_index = cr.i32();
        c.split_count = cr.i32();
        e.length = cr.u64();
    }
    if (!cr.done()) cr.fail("trailing bytes");

    Reader pr(posting_bytes, "postings.bin");
    auto terms = pr.count();
    std::vector<std::pair<std::string, std::vector<std::pair<std::size_t, std::uint32_t>>>> lists;
    for (std::uint64_t t = 0; t < terms; ++t) {
        std::string term = pr.str();
        auto len = pr.count();
        std::vector<std::pair<std::size_t, std::uint32_t>> list;
        for (std::uint64_t i = 0; i < len; ++i) {
            auto pos = pr.u64();
            auto tf = pr.u32();
            if (pos >= n) pr.fail("posting refers to unknown chunk");
            entries[pos].term_freqs[term] = tf;
            list.emplace_back(pos, tf);
        }
        lists.emplace_back(std::move(term), std::move(list));
    }
    if (!pr.done()) pr.fail("trailing bytes");

    Reader vr(vector_bytes, "vectors.bin");
    if (vr.u64() != n || vr.u64() != idx.dim_) vr.fail("vector count or dim mismatch");
    for (auto& e : entries) {
        e.vector.values.resize(idx.dim_);
        for (auto& f : e.vector.values) f = vr.f32();
    }
    if (!vr.done()) vr.fail("trailing bytes");

    for (auto& e : entries) {
        std::size_t sum = 0;
        for (const auto& [t, tf] : e.term_freqs) sum += tf;
        if (sum != e.length) cr.fail("chunk length disagrees with postings");
        idx.insert(std::move(e));
    }
    idx.recompute_avg_len();

    Reader mr(media_bytes, "media.bin");
    auto media = mr.count();
    for (std::uint64_t i = 0; i < media; ++i) {
        MediaRecord m;
        m.marker = mr.str();
        m.media_id = mr.str();
        m.doc_name = mr.str();
        m.caption = mr.str();
        m.description = mr.str();
        m.content_ref = mr.str();
        idx.media_.add(std::move(m));
    }
    if (!mr.done()) mr.fail("trailing bytes");

    if (idx.chunks_.size() != get_u("chunk_count") || idx.postings_.size() != get_u("term_count")) {
        throw Error(ErrorCode::ChecksumError, "manifest counts disagree with segments");
    }
    idx.sealed_ = get("sealed") == "true";
    return idx;
}

}  // namespace specrag
