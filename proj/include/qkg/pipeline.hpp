#pragma once
// End-to-end QA evaluation: reasoner -> validator -> optional reconsideration,
// per-sample records, summary accounting, and run comparison.
//
// The reasoner answers once; if any claim comes back CONTRADICTED the
// reasoner is re-invoked exactly once with the validation report, otherwise
// the final answer is the initial one. Per-sample rows stream to CSV in
// dataset order through a single ordered writer, so reruns produce
// byte-identical files and interrupted runs resume from the CSV.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkg/constraints.hpp"
#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"
#include "qkg/patient_context.hpp"
#include "qkg/validator.hpp"

namespace qkg {

struct QASample {
    std::string id;
    std::string question;
    std::map<char, std::string> choices;  // A..J
    char gold = '?';
    std::optional<PatientContext> precomputed_context;
    std::optional<std::string> kg_grounding_json;  // matched entities, path count
};

// JSONL importer for the released QA dataset shape.
std::vector<QASample> load_qa_dataset(const std::string& path);
void save_qa_dataset(const std::vector<QASample>& samples, const std::string& path);

enum class EvalMode { None, Kg, Qkg };

std::string to_string(EvalMode mode);
std::optional<EvalMode> eval_mode_from_string(const std::string& s);

enum class Revision { Unchanged, WrongToCorrect, CorrectToWrong, WrongToWrongChanged };

std::string to_string(Revision revision);
std::optional<Revision> revision_from_string(const std::string& s);

Revision classify_revision(bool initial_correct, bool final_correct,
                           const std::string& initial_answer, const std::string& final_answer);

struct EvalRecord {
    std::string sample_id;
    std::string initial_answer;  // empty when invalid
    bool initial_correct = false;
    std::string final_answer;
    bool final_correct = false;
    Revision revision = Revision::Unchanged;
    std::vector<Claim> claims;
    std::optional<ValidationReport> report;
    std::int64_t timing_ms = 0;
    bool invalid_answer = false;
};

struct RunSummary {
    size_t n = 0;
    size_t initial_correct = 0;
    size_t final_correct = 0;
    double initial_accuracy = 0.0;
    double final_accuracy = 0.0;
    size_t revised = 0;
    double revised_pct = 0.0;  // rounded to 2 decimals, as reported
    size_t w2c = 0;
    size_t c2w = 0;
    size_t w2w_changed = 0;
    EvalMode mode = EvalMode::None;
    std::string reasoner_model;
    std::string validator_model;
};

struct PipelineConfig {
    EvalMode mode = EvalMode::None;
    std::string reasoner_role = "reasoner";
    std::string validator_role = "validator";
    std::string context_role;  // empty: fallback parser only
    int answer_parse_retries = 1;
    int turn_budget = 20;
    int workers = 1;
    // Reasoner-validator iterations. The default runs exactly one
    // reconsideration; EvalRecord::report always holds the first round's
    // report, the one the initial answer was checked against.
    int max_reconsider_rounds = 1;
    ApplyOptions apply_options;
};

struct PipelineEnv {
    const GraphStore* subgraph = nullptr;        // required for kg/qkg modes
    const ConstraintStore* constraints = nullptr;  // required for qkg mode
};

EvalRecord answer_question(const QASample& sample, Gateway& gateway, const PipelineConfig& config,
                           const PipelineEnv& env);

RunSummary summarize(const std::vector<EvalRecord>& records, const PipelineConfig& config,
                     Gateway& gateway);

// Frozen per-sample CSV columns.
extern const std::vector<std::string> kResultCsvColumns;

struct RunOutput {
    std::string results_csv;    // per-sample rows, dataset order
    std::string reports_jsonl;  // validation reports + claims, one line per sample
    std::string summary_json;
    std::string timings_csv;  // metadata sidecar; the only timing-bearing output
};

// Evaluates the dataset with a bounded worker pool; rows already present in
// results_csv are reused (resume). Individual sample failures are recorded
// as invalid-answer rows and the run continues.
RunSummary run_evaluation(const std::vector<QASample>& samples, Gateway& gateway,
                          const PipelineConfig& config, const PipelineEnv& env,
                          const RunOutput& out);

struct ResultRow {
    std::string sample_id;
    std::string initial_answer;
    bool initial_correct = false;
    std::string final_answer;
    bool final_correct = false;
    Revision revision = Revision::Unchanged;
    EvalMode mode = EvalMode::None;
    std::string validator_model;
};

std::vector<ResultRow> load_result_rows(const std::string& csv_path);
void save_result_rows(const std::vector<ResultRow>& rows, const std::string& csv_path);

struct PairedComparison {
    size_t n = 0;  // size of the id intersection
    size_t b = 0;  // correct in A, wrong in B
    size_t c = 0;  // wrong in A, correct in B
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::pair<bool, bool>>> pairs;  // id -> (a, b)
};

// Pairs two runs on final correctness over the id intersection; warns when
// the id sets differ, errors when the intersection is empty.
PairedComparison compare_runs(const std::vector<ResultRow>& run_a,
                              const std::vector<ResultRow>& run_b);

}  // namespace qkg
