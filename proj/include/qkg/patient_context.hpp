#pragma once
// Structured patient context extracted from question text, and the decision
// step that matches ConstraintItems against it.
//
// Extraction prefers the configured LLM role and degrades to a deterministic
// regex parser (age / sex / labs) on any failure. Constraint matching tries
// the pure rule path first: a single comparator expression parsed from the
// constraint text, compared against a patient lab of matching name. Anything
// the rules cannot decide goes to the LLM judge when one is configured, and
// is otherwise left unknown.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qkg/constraints.hpp"
#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"

namespace qkg {

enum class Comparator { Lt, Le, Eq, Ge, Gt };

std::string to_string(Comparator op);

struct LabValue {
    std::string name;
    double value = 0.0;
    std::string unit;
    std::optional<Comparator> comparator_hint;

    bool operator==(const LabValue&) const = default;
};

struct PatientContext {
    std::optional<double> age;
    std::optional<std::string> sex;  // "female" | "male"
    std::vector<std::string> diagnoses;
    std::vector<LabValue> labs;
    std::vector<std::string> medications;
    std::vector<std::string> other_factors;

    bool empty() const;
    bool operator==(const PatientContext&) const = default;
};

std::string patient_context_to_json(const PatientContext& context);
PatientContext patient_context_from_json(const std::string& json_text);

// Deterministic fallback: regex extraction of age, sex, and labs.
PatientContext parse_patient_context_fallback(const std::string& question_text);

// LLM extraction with guaranteed fallback; never throws.
PatientContext extract_patient_context(const std::string& question_text, Gateway& gateway,
                                       const std::string& role);

// ------------------------------------------------------------- applicability

enum class ApplicabilityVerdict { Applicable, NotApplicable, Unknown };

std::string to_string(ApplicabilityVerdict verdict);

struct ApplicabilityDecision {
    TripletKey triplet_key;
    ApplicabilityVerdict verdict = ApplicabilityVerdict::Unknown;
    std::optional<ConstraintItem> matched_constraint;  // present iff verdict != unknown
    std::string rationale;
    double weight = 0.5;
};

// "NAME OP NUMBER [UNIT]" pulled out of a constraint's characteristics text;
// richer compositional conditions parse to nullopt and are left to the LLM.
struct ConstraintExpr {
    std::string name;
    Comparator op = Comparator::Lt;
    double value = 0.0;
    std::string unit;
};

std::optional<ConstraintExpr> parse_constraint_expr(const std::string& characteristics);

// Monotone ordinal -> weight map: 1.0, 0.75, 0.5, 0.25, 0.0.
double weight_for_level(int ordinal);

// Case-insensitive lab-name match with a small built-in synonym table,
// extendable by callers.
bool lab_name_matches(const std::string& constraint_name, const std::string& lab_name,
                      const std::vector<std::pair<std::string, std::string>>& extra_synonyms = {});

struct RelationWithConstraints {
    TripletRecord triplet;
    TripletKey key;
    std::vector<ConstraintItem> constraints;
};

struct ApplyOptions {
    std::string llm_role;  // empty = rule path only
    std::vector<std::pair<std::string, std::string>> lab_synonyms;
};

// One decision per relation. Rules first; LLM judge when configured;
// unknown (weight 0.5) otherwise. A matched constraint at the bottom ordinal
// yields not_applicable with weight 0.
std::vector<ApplicabilityDecision> apply_constraint_items(
    std::span<const RelationWithConstraints> relations, const PatientContext& context,
    Gateway* gateway = nullptr, const ApplyOptions& options = {});

}  // namespace qkg
