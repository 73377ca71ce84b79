#include "specrag/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::vector<std::string> split_claims(std::string_view input) {
    std::vector<std::string> out;
    std::size_t start = 0;
    auto emit = [&](std::size_t end) {
        auto s = text::trim(input.substr(start, end - start));
        if (!s.empty()) out.push_back(std::move(s));
        start = end;
    };
    for (std::size_t i = 0; i < input.size(); ++i) {
        char c = input[i];
        if ((c == '.' || c == '?' || c == '!') && i + 1 < input.size() &&
            std::isspace(static_cast<unsigned char>(input[i + 1]))) {
            emit(i + 1);
        }
    }
    emit(input.size());
    return out;
}

bool lexical_entails(std::string_view claim, std::string_view against, double threshold) {
    auto words = text::content_words(claim);
    if (words.empty()) {
        auto all = text::terms(claim);
        words = std::set<std::string>(all.begin(), all.end());
    }
    if (words.empty()) return false;
    auto hay = text::terms(against);
    std::set<std::string> present(hay.begin(), hay.end());
    std::size_t hits = 0;
    for (const auto& w : words) hits += present.count(w);
    // Small slack so that exactly-on-threshold ratios are not lost to rounding.
    return static_cast<double>(hits) >= threshold * static_cast<double>(words.size()) - 1e-9;
}

LexicalClaimProvider::LexicalClaimProvider(double threshold) : threshold_(threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw Error(ErrorCode::ConfigError, "entailment threshold must be in (0, 1]");
    }
}

std::vector<std::string> LexicalClaimProvider::extract_claims(std::string_view text) const {
    return split_claims(text);
}

bool LexicalClaimProvider::entails(std::string_view claim, std::string_view against) const {
    return lexical_entails(claim, against, threshold_);
}

GenerationClaimProvider::GenerationClaimProvider(std::shared_ptr<const GenerationProvider> generator)
    : generator_(std::move(generator)) {
    require(generator_ != nullptr, "claim provider needs a generation provider");
}

std::vector<std::string> GenerationClaimProvider::extract_claims(std::string_view input) const {
    GenerationRequest req;
    req.temperature = 0.0;
    req.prompt =
        "Decompose the following text into short, self-contained factual claims. "
        "Return only a JSON array of strings.\n\n<text>\n" + std::string(input) + "\n</text>";
    std::string raw = generate(req, *generator_);
    auto open = raw.find('[');
    auto close = raw.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ProviderError(ProviderFailure::BadResponse, "claim list not found");
    }
    json j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw ProviderError(ProviderFailure::BadResponse, "claim list is not a JSON array");
    }
    std::vector<std::string> out;
    for (const auto& c : j) {
        if (c.is_string()) out.push_back(c.get<std::string>());
    }
    return out;
}

bool GenerationClaimProvider::entails(std::string_view claim, std::string_view against) const {
    GenerationRequest req;
    req.temperature = 0.0;
    req.prompt = "Is the claim fully supported by the passage? Reply with yes or no.\n\n<claim>\n" +
                 std::string(claim) + "\n</claim>\n<passage>\n" + std::string(against) +
                 "\n</passage>";
    auto reply = text::to_lower(text::trim(generate(req, *generator_)));
    if (reply.rfind("yes", 0) == 0) return true;
    if (reply.rfind("no", 0) == 0) return false;
    throw ProviderError(ProviderFailure::BadResponse, "expected yes or no");
}

ClaimSet extract_claims(std::string_view input, ClaimSource source, const ClaimProvider* provider) {
    if (text::trim(input).empty()) {
        throw Error(ErrorCode::InvalidArgument, "cannot extract claims from empty text");
    }
    ClaimSet set;
    set.source = source;
    std::vector<std::string> raw;
    if (provider) {
        try {
            raw = provider->extract_claims(input);
        } catch (const ProviderError&) {
            set.fallback = true;
            raw = split_claims(input);
        }
    } else {
        raw = split_claims(input);
    }
    std::set<std::string> seen;
    for (auto& c : raw) {
        auto t = text::trim(c);
        if (!t.empty() && seen.insert(t).second) set.claims.push_back(std::move(t));
    }
    return set;
}

bool check_entailment(std::string_view claim, std::string_view against,
                      const ClaimProvider* provider, bool* fallback) {
    require(!text::trim(claim).empty() && !text::trim(against).empty(),
            "entailment needs a claim and a text");
    if (provider) {
        try {
            return provider->entails(claim, against);
        } catch (const ProviderError&) {
            if (fallback) *fallback = true;
        }
    }
    return lexical_entails(claim, against);
}

MetricReport score(const EvalRecord& record, const ClaimProvider* provider) {
    require(!text::trim(record.ground_truth).empty(), "ground truth must not be empty");
    MetricReport r;
    bool fb = false;
    auto gt = extract_claims(record.ground_truth, ClaimSource::GroundTruth, provider);
    fb = fb || gt.fallback;
    std::vector<std::string> model;
    if (!text::trim(record.model_answer).empty()) {
        auto m = extract_claims(record.model_answer, ClaimSource::Model, provider);
        fb = fb || m.fallback;
        model = std::move(m.claims);
    }
    std::vector<std::string> chunks;
    for (const auto& c : record.retrieved_context) {
        if (!text::trim(c).empty()) chunks.push_back(c);
    }
    std::string context = text::join(chunks, "\n");

    auto entails = [&](const std::string& claim, const std::string& against) {
        if (text::trim(against).empty()) return false;
        return check_entailment(claim, against, provider, &fb);
    };
    auto ratio = [](std::size_t a, std::size_t b) {
        return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
    };

    std::size_t gt_in_model = 0, gt_in_context = 0;
    for (const auto& c : gt.claims) {
        gt_in_model += entails(c, record.model_answer);
        gt_in_context += entails(c, context);
    }
    std::size_t model_in_gt = 0, model_in_context = 0, neither = 0, gt_only = 0;
    for (const auto& c : model) {
        bool in_gt = entails(c, record.ground_truth);
        bool in_ctx = entails(c, context);
        model_in_gt += in_gt;
        model_in_context += in_ctx;
        if (!in_ctx && in_gt) ++gt_only;
        if (!in_ctx && !in_gt) ++neither;
    }
    std::size_t relevant_chunks = 0;
    for (const auto& chunk : chunks) {
        bool hit = std::any_of(gt.claims.begin(), gt.claims.end(),
                               [&](const std::string& c) { return entails(c, chunk); });
        relevant_chunks += hit;
    }

    r.gt_claims = gt.claims.size();
    r.model_claims = model.size();
    r.context_chunks = chunks.size();
    r.recall = ratio(gt_in_model, gt.claims.size());
    r.precision = ratio(model_in_gt, model.size());
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    r.claim_recall = ratio(gt_in_context, gt.claims.size());
    r.context_precision = ratio(relevant_chunks, chunks.size());
    r.faithfulness = ratio(model_in_context, model.size());
    r.hallucination = ratio(neither, model.size());
    r.self_knowledge = ratio(gt_only, model.size());
    r.fallback = fb;
    return r;
}

MetricReport mean_metrics(const std::vector<MetricReport>& reports) {
    MetricReport m;
    if (reports.empty()) return m;
    for (const auto& r : reports) {
        m.recall += r.recall;
        m.precision += r.precision;
        m.f1 += r.f1;
        m.claim_recall += r.claim_recall;
        m.context_precision += r.context_precision;
        m.faithfulness += r.faithfulness;
        m.hallucination += r.hallucination;
        m.self_knowledge += r.self_knowledge;
        m.gt_claims += r.gt_claims;
        m.model_claims += r.model_claims;
        m.context_chunks += r.context_chunks;
        m.fallback = m.fallback || r.fallback;
    }
    double n = static_cast<double>(reports.size());
    for (double* v : {&m.recall, &m.precision, &m.f1, &m.claim_recall, &m.context_precision,
                      &m.faithfulness, &m.hallucination, &m.self_knowledge}) {
        *v /= n;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Suites

std::vector<SuiteCase> parse_suite(std::string_view jsonl, std::string_view source) {
    std::vector<SuiteCase> out;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        auto t = text::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto where = std::string(source) + ":" + std::to_string(n);
        json j = json::parse(t, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::ParseError, where + ": not a JSON object");
        }
        SuiteCase c;
        try {
            c.question = j.at("question").get<std::string>();
            c.ground_truth = j.at("ground_truth").get<std::string>();
            c.id = j.value("id", "q" + std::to_string(out.size() + 1));
            if (j.contains("gold_docs")) c.gold_docs = j["gold_docs"].get<std::vector<std::string>>();
            c.target_stage = j.value("target_stage", "");
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, where + ": " + e.what());
        }
        if (text::trim(c.question).empty() || text::trim(c.ground_truth).empty()) {
            throw Error(ErrorCode::ParseError, where + ": question and ground_truth must be non-empty");
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<SuiteCase> load_suite(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_suite(ss.str(), path.string());
}

SuiteReport run_suite(const std::vector<SuiteCase>& cases, const Pipeline& pipeline,
                      const ClaimProvider* claims, const QueryOptions& query) {
    if (cases.empty()) throw Error(ErrorCode::EmptySuite, "suite has no records");
    SuiteReport report;
    std::vector<MetricReport> metrics;
    for (const auto& c : cases) {
        RecordResult r;
        r.input = c;
        try {
            Answer a = pipeline.answer(c.question, query);
            r.answer = a.text;
            r.cited_docs = a.cited_docs;
            r.timings = a.timings;
            r.error = a.error;
            EvalRecord rec{c.question, c.ground_truth, a.text, {}};
            for (const auto& e : a.provenance.entries) {
                rec.retrieved_context.push_back(e.text);
                r.context_ids.push_back(e.chunk_id);
            }
            r.metrics = score(rec, claims);
        } catch (const Error& e) {
            r.error = e.what();
            r.metrics = score(EvalRecord{c.question, c.ground_truth, "", {}}, claims);
        }
        metrics.push_back(r.metrics);
        report.records.push_back(std::move(r));
    }
    report.mean = mean_metrics(metrics);
    double n = static_cast<double>(report.records.size());
    for (const auto& r : report.records) {
        report.mean_timings.pre_retrieval_ms += r.timings.pre_retrieval_ms / n;
        report.mean_timings.retrieval_ms += r.timings.retrieval_ms / n;
        report.mean_timings.post_retrieval_ms += r.timings.post_retrieval_ms / n;
        report.mean_timings.generation_ms += r.timings.generation_ms / n;
        report.mean_timings.total_ms += r.timings.total_ms / n;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report files

ojson metrics_to_json(const MetricReport& m) {
    ojson j;
    j["recall"] = m.recall;
    j["precision"] = m.precision;
    j["f1"] = m.f1;
    j["claim_recall"] = m.claim_recall;
    j["context_precision"] = m.context_precision;
    j["faithfulness"] = m.faithfulness;
    j["hallucination"] = m.hallucination;
    j["self_knowledge"] = m.self_knowledge;
    j["gt_claims"] = m.gt_claims;
    j["model_claims"] = m.model_claims;
    j["context_chunks"] = m.context_chunks;
    j["fallback"] = m.fallback;
    return j;
}

ojson timings_to_json(const StageTimings& t) {
    ojson j;
    j["pre_retrieval_ms"] = t.pre_retrieval_ms;
    j["retrieval_ms"] = t.retrieval_ms;
    j["post_retrieval_ms"] = t.post_retrieval_ms;
    j["generation_ms"] = t.generation_ms;
    j["total_ms"] = t.total_ms;
    return j;
}

namespace {

MetricReport metrics_from_json(const json& j) {
    MetricReport m;
    m.recall = j.at("recall").get<double>();
    m.precision = j.at("precision").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.claim_recall = j.at("claim_recall").get<double>();
    m.context_precision = j.at("context_precision").get<double>();
    m.faithfulness = j.at("faithfulness").get<double>();
    m.hallucination = j.at("hallucination").get<double>();
    m.self_knowledge = j.at("self_knowledge").get<double>();
    m.gt_claims = j.at("gt_claims").get<std::size_t>();
    m.model_claims = j.at("model_claims").get<std::size_t>();
    m.context_chunks = j.at("context_chunks").get<std::size_t>();
    m.fallback = j.at("fallback").get<bool>();
    return m;
}

StageTimings timings_from_json(const json& j) {
    StageTimings t;
    t.pre_retrieval_ms = j.at("pre_retrieval_ms").get<double>();
    t.retrieval_ms = j.at("retrieval_ms").get<double>();
    t.post_retrieval_ms = j.at("post_retrieval_ms").get<double>();
    t.generation_ms = j.at("generation_ms").get<double>();
    t.total_ms = j.at("total_ms").get<double>();
    return t;
}

}  // namespace

ojson report_to_json(const SuiteReport& report) {
    ojson j;
    j["format"] = "specrag-eval-report";
    j["version"] = 1;
    j["count"] = report.records.size();
    j["mean"] = metrics_to_json(report.mean);
    j["mean_timings"] = timings_to_json(report.mean_timings);
    j["records"] = ojson::array();
    for (const auto& r : report.records) {
        ojson x;
        x["id"] = r.input.id;
        x["question"] = r.input.question;
        x["ground_truth"] = r.input.ground_truth;
        x["gold_docs"] = r.input.gold_docs;
        x["target_stage"] = r.input.target_stage;
        x["answer"] = r.answer;
        x["cited_docs"] = r.cited_docs;
        x["context_ids"] = r.context_ids;
        x["metrics"] = metrics_to_json(r.metrics);
        x["timings"] = timings_to_json(r.timings);
        x["error"] = r.error ? ojson(*r.error) : ojson(nullptr);
        j["records"].push_back(std::move(x));
    }
    return j;
}

SuiteReport report_from_json(const json& j) {
    SuiteReport report;
    try {
        if (j.at("format") != "specrag-eval-report") {
            throw Error(ErrorCode::ParseError, "not an evaluation report");
        }
        report.mean = metrics_from_json(j.at("mean"));
        report.mean_timings = timings_from_json(j.at("mean_timings"));
        for (const auto& x : j.at("records")) {
            RecordResult r;
            r.input.id = x.at("id").get<std::string>();
            r.input.question = x.at("question").get<std::string>();
            r.input.ground_truth = x.at("ground_truth").get<std::string>();
            r.input.gold_docs = x.at("gold_docs").get<std::vector<std::string>>();
            r.input.target_stage = x.at("target_stage").get<std::string>();
            r.answer = x.at("answer").get<std::string>();
            r.cited_docs = x.at("cited_docs").get<std::vector<std::string>>();
            r.context_ids = x.at("context_ids").get<std::vector<std::string>>();
            r.metrics = metrics_from_json(x.at("metrics"));
            r.timings = timings_from_json(x.at("timings"));
            if (!x.at("error").is_null()) r.error = x.at("error").get<std::string>();
            report.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
    }
    return report;
}

void save_report(const SuiteReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << report_to_json(report).dump(2) << "\n";
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

SuiteReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ParseError, path.string() + ": invalid JSON");
    return report_from_json(j);
}

std::string render_report_table(const SuiteReport& report) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %6s %6s %6s %6s %6s %6s %6s %6s\n", "id", "R", "P", "F1",
                  "CR", "CP", "Faith", "Hall", "SK");
    out += buf;
    auto row = [&](const std::string& id, const MetricReport& m) {
        std::snprintf(buf, sizeof buf, "%-12s %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f\n",
                      id.substr(0, 12).c_str(), m.recall, m.precision, m.f1, m.claim_recall,
                      m.context_precision, m.faithfulness, m.hallucination, m.self_knowledge);
        out += buf;
    };
    for (const auto& r : report.records) row(r.input.id, r.metrics);
    row("mean", report.mean);
    return out;
}

}  // namespace specrag
