#pragma once
// Paired statistics and leakage classification over per-sample results.
//
// mcnemar_exact implements the exact two-sided binomial test on discordant
// counts: p = min(1, 2 * sum_{k=max(b,c)}^{b+c} C(b+c,k) / 2^(b+c)),
// accumulated in exact integer arithmetic before the single final division.
//
// The rest of the module labels CONTRADICTED evidence strings with four
// regex signal families, folds them into per-case classes, and computes the
// leakage-adjusted accuracy and the leakage-adjusted paired test.

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "qkg/validator.hpp"

namespace qkg {

double mcnemar_exact(std::uint64_t b, std::uint64_t c);

// ------------------------------------------------------------------ signals

struct SignalSet {
    bool kg_support = false;
    bool kg_gap = false;
    bool parametric = false;
    bool context = false;
};

// The four pattern families, shipped as a versioned data file
// (conf/signal_patterns.json). builtin() carries the same content compiled in
// so library callers need no file path.
class SignalPatterns {
public:
    static const SignalPatterns& builtin();
    static SignalPatterns load(const std::string& path);

    SignalSet detect(const std::string& evidence) const;
    int version() const { return version_; }

private:
    SignalPatterns() = default;
    struct Family {
        std::vector<std::regex> patterns;  // compiled with icase where requested
    };
    static SignalPatterns from_json_text(const std::string& json_text, const std::string& what);
    static bool matches(const Family& family, const std::string& text);

    int version_ = 0;
    Family kg_support_, kg_gap_, parametric_, context_;
};

enum class EvidenceLabel { EvContext, EvLeakage, EvKgGrounded, EvUnclassified };

std::string to_string(EvidenceLabel label);

// First matching branch wins: context; gap&parametric; parametric without
// support or gap; support; otherwise unclassified.
EvidenceLabel label_evidence(const std::string& evidence,
                             const SignalPatterns& patterns = SignalPatterns::builtin());

// -------------------------------------------------------------- case labels

enum class CaseClass { LikelyKgSupported, Mixed, LikelyLeakage, Unclassified };
enum class LabelSource { Rules, Llm };

std::string to_string(CaseClass cls);
std::optional<CaseClass> case_class_from_string(const std::string& s);

struct CaseLabel {
    CaseClass cls = CaseClass::Unclassified;
    bool ctx_driven = false;  // some decisive evidence carries a context token
    LabelSource source = LabelSource::Rules;
    std::string justification;
};

enum class FlipDirection { WrongToCorrect, CorrectToWrong };

// CONTRADICTED items that either attack the initial answer (supports=true,
// option = initial) or un-eliminate gold (supports=false, option = gold).
// Falls back to all CONTRADICTED items when none qualify.
std::vector<const ClaimVerdict*> decisive_items(const ValidationReport& report,
                                                char initial_answer, char gold);

CaseLabel classify_case(const ValidationReport& report, char initial_answer, char gold,
                        const SignalPatterns& patterns = SignalPatterns::builtin());

// --------------------------------------------------------------- adjustment

// (final_correct - n_leak_w2c) / (N - n_leak_w2c - n_ctx_c2w), evaluated as
// an exact rational; callers report it to 4 decimal places.
double adjusted_accuracy(std::uint64_t final_correct, std::uint64_t n,
                         std::uint64_t n_leak_w2c, std::uint64_t n_ctx_c2w);

struct PairedOutcome {
    std::string sample_id;
    bool correct_a = false;
    bool correct_b = false;
};

struct CaseExclusion {
    std::string sample_id;
    FlipDirection direction = FlipDirection::WrongToCorrect;
    CaseLabel label;
};

struct AdjustedPairedResult {
    size_t n = 0;
    size_t b = 0;  // correct under A, wrong under B
    size_t c = 0;  // wrong under A, correct under B
    double p = 1.0;
    size_t excluded = 0;
};

// Removes, from the paired set, every sample whose W->C was LikelyLeakage or
// whose C->W was ctx-driven LikelyKgSupported in either run, then runs the
// exact McNemar test on the remainder.
AdjustedPairedResult leakage_adjusted_paired_test(const std::vector<PairedOutcome>& pairs,
                                                  const std::vector<CaseExclusion>& labels_a,
                                                  const std::vector<CaseExclusion>& labels_b);

// ------------------------------------------------------------ per-case CSV

std::string to_string(FlipDirection direction);
std::optional<FlipDirection> flip_direction_from_string(const std::string& s);

// One audited revision case. The CSV carries (sample_id, direction,
// regex_label, llm_label, label_source, ctx_driven, justification);
// decisive_evidence stays in memory for the relabel prompt.
struct LeakageCaseRow {
    std::string sample_id;
    FlipDirection direction = FlipDirection::WrongToCorrect;
    CaseClass regex_label = CaseClass::Unclassified;
    std::optional<CaseClass> llm_label;
    LabelSource label_source = LabelSource::Rules;
    bool ctx_driven = false;
    std::string justification;
    std::vector<std::string> decisive_evidence;
};

CaseClass final_case_class(const LeakageCaseRow& row);

LeakageCaseRow build_leakage_case(const std::string& sample_id, FlipDirection direction,
                                  const ValidationReport& report, char initial_answer, char gold,
                                  const SignalPatterns& patterns = SignalPatterns::builtin());

// Asks the configured role to label every rules-Unclassified case from its
// decisive evidence. Failed calls leave the case Unclassified and flagged in
// the justification. No Unclassified cases, no gateway calls.
void relabel_unclassified(std::vector<LeakageCaseRow>& cases, Gateway& gateway,
                          const std::string& role);

void save_case_rows(const std::vector<LeakageCaseRow>& rows, const std::string& csv_path);
std::vector<LeakageCaseRow> load_case_rows(const std::string& csv_path);

}  // namespace qkg
