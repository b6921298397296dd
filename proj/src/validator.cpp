#include "qkg/validator.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "qkg/text.hpp"

namespace qkg {

using nlohmann::json;

std::string to_string(ClaimStatus status) {
    switch (status) {
        case ClaimStatus::Supported: return "SUPPORTED";
        case ClaimStatus::Contradicted: return "CONTRADICTED";
        case ClaimStatus::NoCoverage: return "NO_COVERAGE";
    }
    return "NO_COVERAGE";
}

std::optional<ClaimStatus> claim_status_from_string(const std::string& s) {
    std::string u;
    for (char c : trim(s)) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (u == "SUPPORTED") return ClaimStatus::Supported;
    if (u == "CONTRADICTED") return ClaimStatus::Contradicted;
    if (u == "NO_COVERAGE" || u == "NOCOVERAGE") return ClaimStatus::NoCoverage;
    return std::nullopt;
}

std::string to_string(ValidationMode mode) {
    return mode == ValidationMode::KgOnly ? "kg_only" : "qkg_with_context";
}

bool ValidationReport::any_contradicted() const {
    return std::any_of(verdicts.begin(), verdicts.end(), [](const ClaimVerdict& v) {
        return v.status == ClaimStatus::Contradicted;
    });
}

// -------------------------------------------------------------- serializing

namespace {

json claim_to_json(const Claim& claim) {
    return {{"option", std::string(1, claim.option_label)},
            {"statement", claim.statement},
            {"supports", claim.supports}};
}

Claim claim_from_json(const json& j) {
    Claim claim;
    std::string option = j.value("option", "?");
    claim.option_label = option.empty() ? '?' : option[0];
    claim.statement = j.value("statement", "");
    claim.supports = j.value("supports", true);
    return claim;
}

}  // namespace

std::string validation_report_to_json(const ValidationReport& report) {
    json verdicts = json::array();
    for (const auto& v : report.verdicts) {
        json trace = json::array();
        for (const auto& call : v.tool_trace)
            trace.push_back({{"tool", call.tool}, {"args", call.args_json}, {"result", call.result_json}});
        verdicts.push_back({{"claim", claim_to_json(v.claim)},
                            {"status", to_string(v.status)},
                            {"evidence", v.evidence},
                            {"tool_trace", trace}});
    }
    json j = {{"schema_version", 1},
              {"mode", to_string(report.mode)},
              {"turns_used", report.turns_used},
              {"verdicts", verdicts}};
    return j.dump();
}

ValidationReport validation_report_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValidationError("validation report is not a JSON object");
    ValidationReport report;
    report.mode = j.value("mode", "qkg_with_context") == "kg_only" ? ValidationMode::KgOnly
                                                                   : ValidationMode::QkgWithContext;
    report.turns_used = j.value("turns_used", 0);
    for (const auto& v : j.value("verdicts", json::array())) {
        ClaimVerdict verdict;
        verdict.claim = claim_from_json(v.value("claim", json::object()));
        auto status = claim_status_from_string(v.value("status", ""));
        if (!status) throw ValidationError("bad claim status in report: " + v.value("status", ""));
        verdict.status = *status;
        verdict.evidence = v.value("evidence", "");
        for (const auto& call : v.value("tool_trace", json::array()))
            verdict.tool_trace.push_back(
                {call.value("tool", ""), call.value("args", ""), call.value("result", "")});
        report.verdicts.push_back(std::move(verdict));
    }
    return report;
}

// ------------------------------------------------------------ evidence bundle

std::string get_relations_with_context(const std::vector<std::int64_t>& entities,
                                       const GraphStore& subgraph,
                                       const ConstraintStore& constraints,
                                       const PatientContext& context, ValidationMode mode,
                                       Gateway* gateway, const ApplyOptions& apply_options) {
    std::set<size_t> ids;
    for (std::int64_t entity : entities) {
        if (!subgraph.has_entity(entity)) continue;
        for (size_t id : subgraph.incident_ids(entity)) ids.insert(id);
    }

    std::vector<RelationWithConstraints> relations;
    for (size_t id : ids) {
        TripletRecord t = subgraph.triplet(id);
        RelationWithConstraints r;
        r.triplet = t;
        r.key = {subgraph.entity(t.head).source_id, t.relation, subgraph.entity(t.tail).source_id};
        auto items = constraints.get(r.key);
        r.constraints.assign(items.begin(), items.end());
        relations.push_back(std::move(r));
    }

    std::vector<ApplicabilityDecision> decisions;
    if (mode == ValidationMode::QkgWithContext)
        decisions = apply_constraint_items(relations, context, gateway, apply_options);

    json bundle = json::array();
    for (size_t i = 0; i < relations.size(); ++i) {
        const auto& r = relations[i];
        json entry = {{"head", {{"index", r.triplet.head}, {"name", subgraph.entity(r.triplet.head).name}, {"id", r.key.head_id}}},
                      {"relation", r.triplet.relation},
                      {"tail", {{"index", r.triplet.tail}, {"name", subgraph.entity(r.triplet.tail).name}, {"id", r.key.tail_id}}}};
        if (mode == ValidationMode::QkgWithContext) {
            const auto& d = decisions[i];
            json decision = {{"verdict", to_string(d.verdict)},
                             {"weight", d.weight},
                             {"rationale", d.rationale}};
            if (d.matched_constraint) {
                decision["matched_constraint"] = {
                    {"patient_characteristics", d.matched_constraint->patient_characteristics},
                    {"applicability", constraints.level_label(d.matched_constraint->applicability)},
                    {"evidence", d.matched_constraint->evidence}};
            }
            entry["applicability_decision"] = decision;
            // Constraint records travel with the relation so the validator can
            // quote them; excluded relations are marked rather than hidden.
            json items = json::array();
            for (const auto& item : r.constraints)
                items.push_back({{"patient_characteristics", item.patient_characteristics},
                                 {"applicability", constraints.level_label(item.applicability)},
                                 {"evidence", item.evidence}});
            entry["constraints"] = items;
        }
        bundle.push_back(std::move(entry));
    }
    return json{{"relations", bundle}}.dump();
}

// ----------------------------------------------------------------- tool loop

namespace {

constexpr const char* kValidatorSystemPrompt = R"(You validate claims about multiple-choice medical answers against a knowledge graph.

You interact through tools, one JSON action per reply and nothing else:
  {"tool": "search_entities", "args": {"query": "<name>", "limit": 5}, "claim": <claim index, optional>}
  {"tool": "get_relations_with_context", "args": {"entities": [<entity index>, ...]}, "claim": <claim index, optional>}
When you are done, reply with the final verdicts for every claim:
  {"final": [{"claim": <index>, "status": "SUPPORTED"|"CONTRADICTED"|"NO_COVERAGE", "evidence": "<why, citing what the graph returned>"}, ...]}

Base SUPPORTED and CONTRADICTED verdicts on retrieved graph evidence and the applicability decisions attached to it. A claim the graph cannot speak to is NO_COVERAGE.)";

std::string reformat_instruction() {
    return R"(That reply was not a single valid JSON action. Reply with exactly one JSON object: either {"tool": ..., "args": {...}} or {"final": [...]}.)";
}

}  // namespace

ValidationReport validate_claims(const std::vector<Claim>& claims, const PatientContext& context,
                                 const GraphStore& subgraph, const ConstraintStore& constraints,
                                 Gateway& gateway, const ValidatorOptions& options) {
    ValidationReport report;
    report.mode = options.mode;
    report.verdicts.reserve(claims.size());
    for (const auto& claim : claims)
        report.verdicts.push_back({claim, ClaimStatus::NoCoverage, "", {}});
    if (claims.empty()) return report;

    json claim_list = json::array();
    for (size_t i = 0; i < claims.size(); ++i) {
        json c = claim_to_json(claims[i]);
        c["index"] = i;
        claim_list.push_back(std::move(c));
    }
    json payload = {{"claims", claim_list}, {"mode", to_string(options.mode)}};
    if (options.mode == ValidationMode::QkgWithContext)
        payload["patient_context"] = json::parse(patient_context_to_json(context));

    std::vector<Message> messages = {{"system", kValidatorSystemPrompt},
                                     {"user", payload.dump()}};

    std::set<size_t> resolved;
    std::string failure_note;
    bool got_final = false;

    while (report.turns_used < options.turn_budget) {
        std::string raw;
        try {
            raw = gateway.complete(options.role, messages);
        } catch (const Error& e) {
            failure_note = std::string("validator gateway failure: ") + e.what();
            break;
        }
        ++report.turns_used;
        messages.push_back({"assistant", raw});

        json action;
        try {
            action = json::parse(extract_first_json_object(raw));
        } catch (const Error&) {
            messages.push_back({"user", reformat_instruction()});
            continue;
        }

        if (action.contains("final")) {
            if (!action.at("final").is_array()) {
                messages.push_back({"user", reformat_instruction()});
                continue;
            }
            for (const auto& entry : action.at("final")) {
                if (!entry.is_object() || !entry.contains("claim")) continue;
                size_t idx = entry.at("claim").is_number_unsigned()
                                 ? entry.at("claim").get<size_t>()
                                 : static_cast<size_t>(-1);
                if (idx >= report.verdicts.size()) continue;
                auto status = claim_status_from_string(entry.value("status", ""));
                if (!status) continue;
                std::string evidence = entry.value("evidence", "");
                if (*status != ClaimStatus::NoCoverage && trim(evidence).empty()) {
                    // SUPPORTED/CONTRADICTED require evidence text.
                    report.verdicts[idx].status = ClaimStatus::NoCoverage;
                    report.verdicts[idx].evidence = "validator returned no evidence for this claim";
                } else {
                    report.verdicts[idx].status = *status;
                    report.verdicts[idx].evidence = evidence;
                }
                resolved.insert(idx);
            }
            got_final = true;
            break;
        }

        if (action.contains("tool")) {
            std::string tool = action.value("tool", "");
            json args = action.value("args", json::object());
            json result;
            if (tool == "search_entities") {
                std::string query = args.value("query", "");
                size_t limit = args.value("limit", size_t{5});
                json entities = json::array();
                try {
                    for (const auto& e : subgraph.search_entities(query, limit))
                        entities.push_back({{"index", e.index},
                                            {"id", e.source_id},
                                            {"type", e.entity_type},
                                            {"name", e.name}});
                    result = {{"entities", entities}};
                } catch (const Error& e) {
                    result = {{"error", e.what()}};
                }
            } else if (tool == "get_relations_with_context") {
                std::vector<std::int64_t> entities;
                for (const auto& v : args.value("entities", json::array()))
                    if (v.is_number_integer()) entities.push_back(v.get<std::int64_t>());
                result = json::parse(get_relations_with_context(
                    entities, subgraph, constraints, context, options.mode, &gateway,
                    options.apply_options));
            } else {
                result = {{"error", "unknown tool '" + tool + "'"}};
            }

            ToolCall call{tool, args.dump(), result.dump()};
            if (action.contains("claim") && action.at("claim").is_number_unsigned()) {
                size_t idx = action.at("claim").get<size_t>();
                if (idx < report.verdicts.size()) report.verdicts[idx].tool_trace.push_back(call);
            }
            messages.push_back({"user", json{{"tool_result", result}}.dump()});
            continue;
        }

        messages.push_back({"user", reformat_instruction()});
    }

    for (size_t i = 0; i < report.verdicts.size(); ++i) {
        if (resolved.count(i)) continue;
        report.verdicts[i].status = ClaimStatus::NoCoverage;
        report.verdicts[i].evidence =
            failure_note.empty()
                ? (got_final ? "verdict missing from final action" : "turn budget exhausted")
                : failure_note;
    }
    return report;
}

}  // namespace qkg
