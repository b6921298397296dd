#pragma once
// Validator agent: checks each reasoner claim against the graph and patient
// context, producing SUPPORTED / CONTRADICTED / NO_COVERAGE verdicts.
//
// The validator LLM drives a plain-text tool loop: it emits one JSON action
// per turn, either {"tool": ..., "args": {...}} or {"final": [verdicts]}.
// Malformed actions consume a turn and elicit a reformat instruction. The
// turn budget covers the whole validation round; once it is exhausted,
// unresolved claims become NO_COVERAGE. Gateway failures degrade the same
// way — validation never throws out of validate_claims.

#include <optional>
#include <string>
#include <vector>

#include "qkg/constraints.hpp"
#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"
#include "qkg/patient_context.hpp"

namespace qkg {

struct Claim {
    char option_label = '?';  // A..J
    std::string statement;
    bool supports = true;  // true: argues for the option; false: argues to eliminate it
};

enum class ClaimStatus { Supported, Contradicted, NoCoverage };

std::string to_string(ClaimStatus status);
std::optional<ClaimStatus> claim_status_from_string(const std::string& s);

struct ToolCall {
    std::string tool;
    std::string args_json;
    std::string result_json;
};

struct ClaimVerdict {
    Claim claim;
    ClaimStatus status = ClaimStatus::NoCoverage;
    std::string evidence;  // non-empty whenever status != NO_COVERAGE
    std::vector<ToolCall> tool_trace;
};

enum class ValidationMode { KgOnly, QkgWithContext };

std::string to_string(ValidationMode mode);

struct ValidationReport {
    std::vector<ClaimVerdict> verdicts;
    int turns_used = 0;
    ValidationMode mode = ValidationMode::QkgWithContext;

    bool any_contradicted() const;
};

std::string validation_report_to_json(const ValidationReport& report);
ValidationReport validation_report_from_json(const std::string& json_text);

struct ValidatorOptions {
    std::string role = "validator";
    ValidationMode mode = ValidationMode::QkgWithContext;
    int turn_budget = 20;
    ApplyOptions apply_options;  // constraint matching config (qkg mode)
};

// Relations incident to the given entities. In qkg mode each relation
// carries its ApplicabilityDecision; in kg-only mode relations carry none
// and the patient context is never consulted.
std::string get_relations_with_context(const std::vector<std::int64_t>& entities,
                                       const GraphStore& subgraph,
                                       const ConstraintStore& constraints,
                                       const PatientContext& context, ValidationMode mode,
                                       Gateway* gateway = nullptr,
                                       const ApplyOptions& apply_options = {});

ValidationReport validate_claims(const std::vector<Claim>& claims, const PatientContext& context,
                                 const GraphStore& subgraph, const ConstraintStore& constraints,
                                 Gateway& gateway, const ValidatorOptions& options = {});

}  // namespace qkg
