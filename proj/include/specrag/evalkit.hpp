#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specrag/pipeline.hpp"
#include "specrag/providers.hpp"

namespace specrag {

enum class ClaimSource { Model, GroundTruth, Context };

struct ClaimSet {
    std::vector<std::string> claims;  // non-empty, deduplicated, first-seen order
    ClaimSource source = ClaimSource::Model;
    bool fallback = false;  // provider failed, sentence splitter used
};

inline constexpr double kDefaultEntailmentThreshold = 0.8;

/// Sentence split on '.', '?' or '!' followed by whitespace.
std::vector<std::string> split_claims(std::string_view text);

/// True when at least `threshold` of the claim's content words occur in
/// `against`. A claim made only of stopwords must match all its terms.
bool lexical_entails(std::string_view claim, std::string_view against,
                     double threshold = kDefaultEntailmentThreshold);

/// Deterministic offline checker built on split_claims and lexical_entails.
class LexicalClaimProvider final : public ClaimProvider {
  public:
    explicit LexicalClaimProvider(double threshold = kDefaultEntailmentThreshold);
    std::string name() const override { return "lexical"; }
    std::vector<std::string> extract_claims(std::string_view text) const override;
    bool entails(std::string_view claim, std::string_view against) const override;
    double threshold() const { return threshold_; }

  private:
    double threshold_;
};

/// Claim extraction and checking by prompting a generation provider.
class GenerationClaimProvider final : public ClaimProvider {
  public:
    explicit GenerationClaimProvider(std::shared_ptr<const GenerationProvider> generator);
    std::string name() const override { return "generation"; }
    std::vector<std::string> extract_claims(std::string_view text) const override;
    bool entails(std::string_view claim, std::string_view against) const override;

  private:
    std::shared_ptr<const GenerationProvider> generator_;
};

/// `provider` may be null for the sentence fallback. Throws InvalidArgument
/// on blank text.
ClaimSet extract_claims(std::string_view text, ClaimSource source,
                        const ClaimProvider* provider = nullptr);

/// `provider` may be null for the lexical fallback. `fallback` is set when a
/// provider error forced the lexical path.
bool check_entailment(std::string_view claim, std::string_view against,
                      const ClaimProvider* provider = nullptr, bool* fallback = nullptr);

struct EvalRecord {
    std::string question;
    std::string ground_truth;
    std::string model_answer;
    std::vector<std::string> retrieved_context;
};

struct MetricReport {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double claim_recall = 0.0;
    double context_precision = 0.0;
    double faithfulness = 0.0;
    double hallucination = 0.0;
    double self_knowledge = 0.0;

    std::size_t gt_claims = 0;
    std::size_t model_claims = 0;
    std::size_t context_chunks = 0;
    bool fallback = false;

    bool operator==(const MetricReport&) const = default;
};

MetricReport score(const EvalRecord& record, const ClaimProvider* provider = nullptr);

/// Unweighted mean of the eight metrics; counts are summed.
MetricReport mean_metrics(const std::vector<MetricReport>& reports);

/// One line of a suite file (JSON Lines).
struct SuiteCase {
    std::string id;
    std::string question;
    std::string ground_truth;
    std::vector<std::string> gold_docs;
    std::string target_stage;
};

std::vector<SuiteCase> parse_suite(std::string_view jsonl, std::string_view source = "<memory>");
std::vector<SuiteCase> load_suite(const std::filesystem::path& path);

struct RecordResult {
    SuiteCase input;
    std::string answer;
    std::vector<std::string> cited_docs;
    std::vector<std::string> context_ids;
    MetricReport metrics;
    StageTimings timings;
    std::optional<std::string> error;
};

struct SuiteReport {
    std::vector<RecordResult> records;
    MetricReport mean;
    StageTimings mean_timings;
};

/// Answers and scores every case. Throws EmptySuite.
SuiteReport run_suite(const std::vector<SuiteCase>& cases, const Pipeline& pipeline,
                      const ClaimProvider* claims = nullptr, const QueryOptions& query = {});

nlohmann::ordered_json metrics_to_json(const MetricReport& m);
nlohmann::ordered_json timings_to_json(const StageTimings& t);
nlohmann::ordered_json report_to_json(const SuiteReport& report);
SuiteReport report_from_json(const nlohmann::json& j);
void save_report(const SuiteReport& report, const std::filesystem::path& path);
SuiteReport load_report(const std::filesystem::path& path);

/// Fixed-width table: one row per record plus the mean.
std::string render_report_table(const SuiteReport& report);

}  // namespace specrag
