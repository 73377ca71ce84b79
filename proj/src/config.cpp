#include "specrag/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "specrag/error.hpp"
#include "specrag/evalkit.hpp"
#include "specrag/text.hpp"

namespace specrag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Visits one JSON object: typed field readers record errors instead of
// throwing, and finish() reports keys nobody asked for.
class ObjectReader {
  public:
    ObjectReader(const json& j, std::string path, std::vector<std::string>& errors)
        : j_(j), path_(std::move(path)), errors_(errors) {
        if (!j_.is_object()) {
            error(path_.empty() ? "/" : path_, "must be an object");
            ok_ = false;
        }
    }

    bool ok() const { return ok_; }

    const json* field(const std::string& key) {
        seen_.push_back(key);
        if (!ok_ || !j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    void number(const std::string& key, double& out, double lo, double hi, bool hi_open = false) {
        const json* v = field(key);
        if (!v) return;
        if (!v->is_number()) return error(at(key), "must be a number");
        double x = v->get<double>();
        if (x < lo || x > hi || (hi_open && x == hi)) {
            return error(at(key), "must be in [" + fmt(lo) + ", " + fmt(hi) + (hi_open ? ")" : "]") +
                                      " (got " + fmt(x) + ")");
        }
        out = x;
    }

    template <typename Int>
    void integer(const std::string& key, Int& out, std::uint64_t lo, std::uint64_t hi) {
        const json* v = field(key);
        if (!v) return;
        if (!v->is_number_unsigned()) return error(at(key), "must be a non-negative integer");
        auto x = v->get<std::uint64_t>();
        if (x < lo || x > hi) {
            return error(at(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                      "] (got " + std::to_string(x) + ")");
        }
        out = static_cast<Int>(x);
    }

    void boolean(const std::string& key, bool& out) {
        const json* v = field(key);
        if (!v) return;
        if (!v->is_boolean()) return error(at(key), "must be a boolean");
        out = v->get<bool>();
    }

    void string(const std::string& key, std::string& out, bool nullable = false) {
        const json* v = field(key);
        if (!v) return;
        if (nullable && v->is_null()) {
            out.clear();
            return;
        }
        if (!v->is_string()) return error(at(key), nullable ? "must be a string or null" : "must be a string");
        out = v->get<std::string>();
    }

    void choice(const std::string& key, std::string& out, const std::vector<std::string>& allowed) {
        std::string v = out;
        const json* raw = field(key);
        if (!raw) return;
        seen_.pop_back();
        string(key, v);
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            if (raw->is_string()) error(at(key), "must be one of " + text::join(allowed, ", ") + " (got '" + v + "')");
            return;
        }
        out = v;
    }

    void object(const std::string& key, const std::function<void(ObjectReader&)>& body) {
        const json* v = field(key);
        if (!v) return;
        ObjectReader child(*v, at(key), errors_);
        if (!child.ok()) return;
        body(child);
        child.finish();
    }

    void finish() {
        if (!ok_) return;
        for (const auto& [k, _] : j_.items()) {
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) error(at(k), "unknown key");
        }
    }

    std::string at(const std::string& key) const { return path_ + "/" + key; }
    void error(const std::string& where, const std::string& what) {
        errors_.push_back(where + ": " + what);
    }

  private:
    static std::string fmt(double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", x);
        return buf;
    }

    const json& j_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::vector<std::string> seen_;
    bool ok_ = true;
};

void read_endpoint(ObjectReader& r, HttpEndpoint& ep) {
    r.string("base_url", ep.base_url);
    r.string("model", ep.model);
    r.string("api_key_env", ep.api_key_env);
    r.integer("timeout_seconds", ep.timeout_seconds, 1, 3600);
}

void apply(const json& j, PipelineConfig& cfg, std::vector<std::string>& errors) {
    ObjectReader root(j, "", errors);
    if (!root.ok()) return;
    auto& p = cfg.pipeline;

    root.object("chunking", [&](ObjectReader& r) {
        r.integer("s_max", p.chunking.s_max, 32, 1u << 20);
        r.number("overlap", p.chunking.overlap, 0.0, 0.5, true);
        std::string strategy = p.chunking.strategy == ChunkStrategy::Fixed ? "fixed" : "structural";
        r.choice("strategy", strategy, {"structural", "fixed"});
        p.chunking.strategy = strategy == "fixed" ? ChunkStrategy::Fixed : ChunkStrategy::Structural;
        r.choice("token_counter", p.chunking.token_counter, {"whitespace"});
    });
    root.object("retrieval", [&](ObjectReader& r) {
        auto& rc = p.retrieval;
        r.number("alpha", rc.alpha, 0.0, 1.0);
        r.integer("candidate_k", rc.candidate_k, 1, 100000);
        r.integer("final_k", rc.final_k, 1, 100000);
        r.boolean("expand_parents", rc.expand_parents);
        std::string scoring = rc.parent_scoring == ParentScoring::Self ? "self" : "inherit";
        r.choice("parent_scoring", scoring, {"self", "inherit"});
        rc.parent_scoring = scoring == "self" ? ParentScoring::Self : ParentScoring::Inherit;
        r.object("stages", [&](ObjectReader& s) {
            s.boolean("hybrid", rc.stages.hybrid);
            s.boolean("hierarchical", rc.stages.hierarchical);
            s.boolean("filter", rc.stages.filter);
            s.boolean("rerank", rc.stages.rerank);
        });
        if (rc.final_k > rc.candidate_k) {
            r.error(r.at("final_k"), "must not exceed candidate_k (" +
                                         std::to_string(rc.candidate_k) + ")");
        }
    });
    root.object("generation", [&](ObjectReader& r) {
        r.number("temperature", p.generation.temperature, 0.0, 2.0);
        r.integer("budget_tokens", p.generation.budget_tokens, 1, 10000000);
    });
    root.object("query", [&](ObjectReader& r) {
        r.boolean("expansion", p.query_expansion);
        std::string mode = p.metadata_mode == MetadataMode::Rules      ? "rules"
                           : p.metadata_mode == MetadataMode::Provider ? "provider"
                                                                        : "hybrid";
        r.choice("metadata_mode", mode, {"rules", "provider", "hybrid"});
        p.metadata_mode = mode == "rules"      ? MetadataMode::Rules
                          : mode == "provider" ? MetadataMode::Provider
                                               : MetadataMode::Hybrid;
        r.string("glossary", cfg.glossary_path, true);
    });
    root.boolean("multimodal", p.multimodal);
    root.string("index_path", cfg.index_path);
    root.object("providers", [&](ObjectReader& r) {
        auto& pc = cfg.providers;
        r.object("generation", [&](ObjectReader& g) {
            g.choice("kind", pc.generation, {"stub", "http"});
            read_endpoint(g, pc.generation_endpoint);
        });
        r.object("embedding", [&](ObjectReader& e) {
            e.choice("kind", pc.embedding, {"stub", "http"});
            e.integer("dim", pc.embedding_dim, 1, 65536);
            e.integer("bucket_seed", pc.bucket_seed, 0, UINT64_MAX);
            e.integer("sign_seed", pc.sign_seed, 0, UINT64_MAX);
            read_endpoint(e, pc.embedding_endpoint);
        });
        r.object("description", [&](ObjectReader& d) {
            d.choice("kind", pc.description, {"stub", "generation"});
        });
        r.object("claims", [&](ObjectReader& c) {
            c.choice("kind", pc.claims, {"lexical", "generation"});
            c.number("threshold", pc.entailment_threshold, 0.0, 1.0);
            if (pc.entailment_threshold == 0.0) c.error(c.at("threshold"), "must be positive");
        });
        if (pc.generation == "http" && pc.generation_endpoint.base_url.empty()) {
            r.error("/providers/generation/base_url", "required when kind is http");
        }
        if (pc.embedding == "http" && pc.embedding_endpoint.base_url.empty()) {
            r.error("/providers/embedding/base_url", "required when kind is http");
        }
    });
    root.finish();
}

}  // namespace

std::vector<std::string> validate_config(const json& j) {
    PipelineConfig scratch;
    std::vector<std::string> errors;
    apply(j, scratch, errors);
    return errors;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig cfg;
    std::vector<std::string> errors;
    apply(j, cfg, errors);
    if (!errors.empty()) {
        throw Error(ErrorCode::ConfigError, std::to_string(errors.size()) + " problem(s):\n  " +
                                                text::join(errors, "\n  "));
    }
    return cfg;
}

ojson config_to_json(const PipelineConfig& cfg) {
    const auto& p = cfg.pipeline;
    const auto& pc = cfg.providers;
    auto endpoint = [](const HttpEndpoint& ep) {
        ojson j;
        j["base_url"] = ep.base_url;
        j["model"] = ep.model;
        j["api_key_env"] = ep.api_key_env;
        j["timeout_seconds"] = ep.timeout_seconds;
        return j;
    };
    ojson j;
    j["chunking"] = {{"s_max", p.chunking.s_max},
                     {"overlap", p.chunking.overlap},
                     {"strategy", p.chunking.strategy == ChunkStrategy::Fixed ? "fixed" : "structural"},
                     {"token_counter", p.chunking.token_counter}};
    j["retrieval"] = {
        {"alpha", p.retrieval.alpha},
        {"candidate_k", p.retrieval.candidate_k},
        {"final_k", p.retrieval.final_k},
        {"expand_parents", p.retrieval.expand_parents},
        {"parent_scoring", p.retrieval.parent_scoring == ParentScoring::Self ? "self" : "inherit"},
        {"stages",
         {{"hybrid", p.retrieval.stages.hybrid},
          {"hierarchical", p.retrieval.stages.hierarchical},
          {"filter", p.retrieval.stages.filter},
          {"rerank", p.retrieval.stages.rerank}}}};
    j["generation"] = {{"temperature", p.generation.temperature},
                       {"budget_tokens", p.generation.budget_tokens}};
    j["query"] = {{"expansion", p.query_expansion},
                  {"metadata_mode", p.metadata_mode == MetadataMode::Rules      ? "rules"
                                    : p.metadata_mode == MetadataMode::Provider ? "provider"
                                                                                : "hybrid"},
                  {"glossary", cfg.glossary_path.empty() ? ojson(nullptr) : ojson(cfg.glossary_path)}};
    j["multimodal"] = p.multimodal;
    j["index_path"] = cfg.index_path;
    ojson gen = {{"kind", pc.generation}};
    gen.update(endpoint(pc.generation_endpoint));
    ojson emb = {{"kind", pc.embedding},
                 {"dim", pc.embedding_dim},
                 {"bucket_seed", pc.bucket_seed},
                 {"sign_seed", pc.sign_seed}};
    emb.update(endpoint(pc.embedding_endpoint));
    j["providers"] = {{"generation", gen},
                      {"embedding", emb},
                      {"description", {{"kind", pc.description}}},
                      {"claims", {{"kind", pc.claims}, {"threshold", pc.entailment_threshold}}}};
    return j;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ConfigError, path.string() + ": invalid JSON");
    PipelineConfig cfg;
    try {
        cfg = config_from_json(j);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    auto base = path.parent_path();
    if (!cfg.glossary_path.empty() && std::filesystem::path(cfg.glossary_path).is_relative()) {
        cfg.glossary_path = (base / cfg.glossary_path).string();
    }
    if (!cfg.index_path.empty() && std::filesystem::path(cfg.index_path).is_relative() &&
        j.contains("index_path")) {
        cfg.index_path = (base / cfg.index_path).string();
    }
    return cfg;
}

ProviderSet make_providers(const ProviderConfig& cfg) {
    ProviderSet set;
    if (cfg.generation == "http") {
        set.generation = std::make_shared<HttpGenerationProvider>(cfg.generation_endpoint);
    } else {
        set.generation = std::make_shared<StubGenerationProvider>();
    }
    if (cfg.embedding == "http") {
        set.embedding = std::make_shared<HttpEmbeddingProvider>(cfg.embedding_endpoint, cfg.embedding_dim);
    } else {
        set.embedding = std::make_shared<HashingEmbeddingProvider>(cfg.embedding_dim, cfg.bucket_seed,
                                                                   cfg.sign_seed);
    }
    if (cfg.description == "generation") {
        set.description = std::make_shared<GenerationDescriptionProvider>(set.generation);
    } else {
        set.description = std::make_shared<StubDescriptionProvider>();
    }
    set.claims = make_claim_provider(cfg, set);
    return set;
}

std::shared_ptr<const ClaimProvider> make_claim_provider(const ProviderConfig& cfg,
                                                         const ProviderSet& providers) {
    if (cfg.claims == "generation") {
        return std::make_shared<GenerationClaimProvider>(providers.generation);
    }
    return std::make_shared<LexicalClaimProvider>(cfg.entailment_threshold);
}

Glossary load_glossary(const PipelineConfig& cfg) {
    return cfg.glossary_path.empty() ? Glossary::builtin() : Glossary::load(cfg.glossary_path);
}

}  // namespace specrag
