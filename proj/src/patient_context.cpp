#include "qkg/patient_context.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <nlohmann/json.hpp>

#include "qkg/text.hpp"

namespace qkg {

using nlohmann::json;

std::string to_string(Comparator op) {
    switch (op) {
        case Comparator::Lt: return "<";
        case Comparator::Le: return "<=";
        case Comparator::Eq: return "=";
        case Comparator::Ge: return ">=";
        case Comparator::Gt: return ">";
    }
    return "=";
}

namespace {

std::optional<Comparator> comparator_from_string(const std::string& s) {
    if (s == "<") return Comparator::Lt;
    if (s == "<=" || s == "≤") return Comparator::Le;
    if (s == "=" || s == "==") return Comparator::Eq;
    if (s == ">=" || s == "≥") return Comparator::Ge;
    if (s == ">") return Comparator::Gt;
    return std::nullopt;
}

bool comparator_holds(double lhs, Comparator op, double rhs) {
    switch (op) {
        case Comparator::Lt: return lhs < rhs;
        case Comparator::Le: return lhs <= rhs;
        case Comparator::Eq: return lhs == rhs;
        case Comparator::Ge: return lhs >= rhs;
        case Comparator::Gt: return lhs > rhs;
    }
    return false;
}

double parse_number_with_commas(std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
    return std::stod(s);
}

}  // namespace

bool PatientContext::empty() const {
    return !age && !sex && diagnoses.empty() && labs.empty() && medications.empty() &&
           other_factors.empty();
}

std::string patient_context_to_json(const PatientContext& context) {
    json j;
    if (context.age) j["age"] = *context.age;
    if (context.sex) j["sex"] = *context.sex;
    j["diagnoses"] = context.diagnoses;
    j["labs"] = json::array();
    for (const auto& lab : context.labs) {
        json l = {{"name", lab.name}, {"value", lab.value}, {"unit", lab.unit}};
        if (lab.comparator_hint) l["comparator_hint"] = to_string(*lab.comparator_hint);
        j["labs"].push_back(l);
    }
    j["medications"] = context.medications;
    j["other_factors"] = context.other_factors;
    return j.dump();
}

PatientContext patient_context_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValidationError("patient context is not a JSON object");
    PatientContext out;
    if (j.contains("age") && !j.at("age").is_null()) {
        double age = j.at("age").is_string() ? std::stod(j.at("age").get<std::string>())
                                             : j.at("age").get<double>();
        if (age < 0) throw ValidationError("age must be >= 0");
        out.age = age;
    }
    if (j.contains("sex") && j.at("sex").is_string()) {
        std::string sex = to_lower(j.at("sex").get<std::string>());
        if (!sex.empty()) out.sex = sex;
    }
    auto strings = [&](const char* key) {
        std::vector<std::string> v;
        if (j.contains(key) && j.at(key).is_array())
            for (const auto& item : j.at(key))
                if (item.is_string()) v.push_back(item.get<std::string>());
        return v;
    };
    out.diagnoses = strings("diagnoses");
    out.medications = strings("medications");
    out.other_factors = strings("other_factors");
    if (j.contains("labs") && j.at("labs").is_array()) {
        for (const auto& l : j.at("labs")) {
            if (!l.is_object() || !l.contains("name") || !l.contains("value")) continue;
            LabValue lab;
            lab.name = l.at("name").get<std::string>();
            lab.value = l.at("value").is_string()
                            ? parse_number_with_commas(l.at("value").get<std::string>())
                            : l.at("value").get<double>();
            if (!std::isfinite(lab.value))
                throw ValidationError("lab value must be finite: " + lab.name);
            lab.unit = l.value("unit", "");
            if (l.contains("comparator_hint"))
                lab.comparator_hint = comparator_from_string(l.at("comparator_hint").get<std::string>());
            out.labs.push_back(std::move(lab));
        }
    }
    return out;
}

// ----------------------------------------------------------------- fallback

namespace {

// Lab names the fallback parser scans for. Matching is longest-first so
// "platelet count" wins over "platelet".
const std::vector<std::string> kKnownLabs = {
    "platelet count", "platelets",  "egfr",        "hba1c",      "creatinine",
    "hemoglobin",     "hematocrit", "inr",         "glucose",    "white blood cell count",
    "wbc",            "potassium",  "sodium",      "bilirubin",  "blood pressure",
    "heart rate",     "ldl",        "hdl",         "triglycerides",
};

}  // namespace

PatientContext parse_patient_context_fallback(const std::string& question_text) {
    PatientContext out;
    if (trim(question_text).empty()) return out;

    static const std::regex age_re(
        R"((\d{1,3})\s*(?:-|\s)?\s*(?:year|yr)s?\s*(?:-|\s)?\s*old|aged\s+(\d{1,3})|(\d{1,3})\s*y/?o\b)",
        std::regex::icase);
    std::smatch m;
    if (std::regex_search(question_text, m, age_re)) {
        for (size_t g = 1; g < m.size(); ++g) {
            if (m[g].matched) {
                out.age = std::stod(m[g].str());
                break;
            }
        }
    }

    static const std::regex female_re(R"(\b(woman|female|girl|lady)\b)", std::regex::icase);
    static const std::regex male_re(R"(\b(man|male|boy|gentleman)\b)", std::regex::icase);
    if (std::regex_search(question_text, female_re))
        out.sex = "female";
    else if (std::regex_search(question_text, male_re))
        out.sex = "male";

    // Lab phrases: "<name> [of|is|was|at|:|=] [<op>] <number> [<unit>]".
    std::string lower = to_lower(question_text);
    for (const auto& lab_name : kKnownLabs) {
        size_t pos = 0;
        while ((pos = lower.find(lab_name, pos)) != std::string::npos) {
            static const std::regex value_re(
                R"(^\s*(?:of|is|was|at|:|=)?\s*(<=|>=|<|>|≤|≥)?\s*(\d[\d,]*(?:\.\d+)?)\s*([%a-zA-Z/][A-Za-z0-9/%^]*)?)");
            std::string rest = question_text.substr(pos + lab_name.size());
            std::smatch vm;
            if (std::regex_search(rest, vm, value_re) && vm[2].matched) {
                LabValue lab;
                lab.name = lab_name;
                if (vm[1].matched) lab.comparator_hint = comparator_from_string(vm[1].str());
                lab.value = parse_number_with_commas(vm[2].str());
                lab.unit = vm[3].matched ? vm[3].str() : "";
                bool duplicate = false;
                for (const auto& existing : out.labs)
                    if (existing.name == lab.name && existing.value == lab.value) duplicate = true;
                if (!duplicate) out.labs.push_back(std::move(lab));
            }
            pos += lab_name.size();
        }
    }
    return out;
}

PatientContext extract_patient_context(const std::string& question_text, Gateway& gateway,
                                       const std::string& role) {
    if (role.empty() || !gateway.has_role(role))
        return parse_patient_context_fallback(question_text);
    std::vector<Message> messages = {
        {"system",
         "Extract the structured patient characteristics from the clinical question. Reply with "
         "one JSON object with fields: age (number or null), sex (\"female\"/\"male\"/null), "
         "diagnoses (string array), labs (array of {name, value, unit, comparator_hint}), "
         "medications (string array), other_factors (string array). Use null or empty arrays for "
         "anything not stated."},
        {"user", question_text}};
    try {
        std::string raw = gateway.complete(role, messages);
        return patient_context_from_json(extract_first_json_object(raw));
    } catch (const Error&) {
        return parse_patient_context_fallback(question_text);
    }
}

// ------------------------------------------------------------- applicability

std::string to_string(ApplicabilityVerdict verdict) {
    switch (verdict) {
        case ApplicabilityVerdict::Applicable: return "applicable";
        case ApplicabilityVerdict::NotApplicable: return "not_applicable";
        case ApplicabilityVerdict::Unknown: return "unknown";
    }
    return "unknown";
}

double weight_for_level(int ordinal) {
    static const double weights[5] = {1.0, 0.75, 0.5, 0.25, 0.0};
    if (ordinal < 0) return 1.0;
    if (ordinal > 4) return 0.0;
    return weights[ordinal];
}

std::optional<ConstraintExpr> parse_constraint_expr(const std::string& characteristics) {
    // One comparator expression and nothing else; compositional conditions
    // (connectives, multiple comparators) go to the LLM judge instead.
    static const std::regex expr_re(
        R"(^\s*([A-Za-z][A-Za-z0-9 /%\-]*?)\s*(<=|>=|==|=|<|>|≤|≥)\s*(\d[\d,]*(?:\.\d+)?)\s*([%a-zA-Z/][A-Za-z0-9/%^]*)?\s*$)");
    std::smatch m;
    if (!std::regex_match(characteristics, m, expr_re)) return std::nullopt;
    std::string lower = to_lower(characteristics);
    if (lower.find(" and ") != std::string::npos || lower.find(" or ") != std::string::npos)
        return std::nullopt;
    ConstraintExpr expr;
    expr.name = trim(m[1].str());
    auto op = comparator_from_string(m[2].str());
    if (!op) return std::nullopt;
    expr.op = *op;
    expr.value = parse_number_with_commas(m[3].str());
    expr.unit = m[4].matched ? m[4].str() : "";
    return expr;
}

namespace {

const std::vector<std::pair<std::string, std::string>> kBuiltinLabSynonyms = {
    {"platelets", "platelet count"},
    {"plt", "platelet count"},
    {"wbc", "white blood cell count"},
    {"hgb", "hemoglobin"},
    {"gfr", "egfr"},
};

std::string canonical_lab_name(const std::string& name,
                               const std::vector<std::pair<std::string, std::string>>& extra) {
    std::string n = normalize_name(name);
    for (const auto& [alias, canonical] : kBuiltinLabSynonyms)
        if (n == alias) n = canonical;
    for (const auto& [alias, canonical] : extra)
        if (n == normalize_name(alias)) n = normalize_name(canonical);
    return n;
}

}  // namespace

bool lab_name_matches(const std::string& constraint_name, const std::string& lab_name,
                      const std::vector<std::pair<std::string, std::string>>& extra_synonyms) {
    return canonical_lab_name(constraint_name, extra_synonyms) ==
           canonical_lab_name(lab_name, extra_synonyms);
}

namespace {

ApplicabilityDecision judge_with_llm(const RelationWithConstraints& relation,
                                     const PatientContext& context, Gateway& gateway,
                                     const std::string& role) {
    ApplicabilityDecision decision;
    decision.triplet_key = relation.key;
    json constraints = json::array();
    for (const auto& item : relation.constraints)
        constraints.push_back({{"patient_characteristics", item.patient_characteristics},
                               {"applicability", item.applicability},
                               {"evidence", item.evidence}});
    json payload = {{"relation",
                     {{"head", relation.key.head_id},
                      {"relation", relation.key.relation},
                      {"tail", relation.key.tail_id}}},
                    {"constraints", constraints},
                    {"patient_context", json::parse(patient_context_to_json(context))}};
    std::vector<Message> messages = {
        {"system",
         "Decide whether the relation applies to this patient given its constraint records. "
         "Reply with one JSON object: {\"verdict\": \"applicable\"|\"not_applicable\"|\"unknown\", "
         "\"constraint_index\": <index of the decisive constraint or null>, \"rationale\": \"...\"}."},
        {"user", payload.dump()}};
    try {
        std::string raw = gateway.complete(role, messages);
        json parsed = json::parse(extract_first_json_object(raw));
        std::string verdict = to_lower(parsed.value("verdict", "unknown"));
        decision.rationale = parsed.value("rationale", "");
        size_t index = 0;
        if (parsed.contains("constraint_index") && parsed.at("constraint_index").is_number_unsigned())
            index = std::min(parsed.at("constraint_index").get<size_t>(),
                             relation.constraints.empty() ? size_t{0}
                                                          : relation.constraints.size() - 1);
        if (verdict == "applicable" && !relation.constraints.empty()) {
            decision.verdict = ApplicabilityVerdict::Applicable;
            decision.matched_constraint = relation.constraints[index];
            decision.weight = weight_for_level(decision.matched_constraint->applicability);
            if (decision.weight <= 0.0) {
                // Bottom-ordinal constraints cannot support an applicable verdict.
                decision.verdict = ApplicabilityVerdict::NotApplicable;
            }
        } else if (verdict == "not_applicable" && !relation.constraints.empty()) {
            decision.verdict = ApplicabilityVerdict::NotApplicable;
            decision.matched_constraint = relation.constraints[index];
            decision.weight = 0.0;
        } else {
            decision.verdict = ApplicabilityVerdict::Unknown;
            decision.matched_constraint.reset();
            decision.weight = 0.5;
        }
    } catch (const Error& e) {
        decision.verdict = ApplicabilityVerdict::Unknown;
        decision.matched_constraint.reset();
        decision.weight = 0.5;
        decision.rationale = std::string("llm judge unavailable: ") + e.what();
    }
    return decision;
}

}  // namespace

std::vector<ApplicabilityDecision> apply_constraint_items(
    std::span<const RelationWithConstraints> relations, const PatientContext& context,
    Gateway* gateway, const ApplyOptions& options) {
    std::vector<ApplicabilityDecision> decisions;
    decisions.reserve(relations.size());

    for (const auto& relation : relations) {
        ApplicabilityDecision decision;
        decision.triplet_key = relation.key;

        if (relation.constraints.empty()) {
            // Unannotated relations keep flowing as plain-KG evidence.
            decision.verdict = ApplicabilityVerdict::Unknown;
            decision.weight = 0.5;
            decision.rationale = "no constraint records for this relation";
            decisions.push_back(std::move(decision));
            continue;
        }

        // Rule path: numeric comparator against a patient lab of the same name.
        const ConstraintItem* matched = nullptr;
        const LabValue* matched_lab = nullptr;
        bool any_rule_parseable = false;
        for (const auto& item : relation.constraints) {
            auto expr = parse_constraint_expr(item.patient_characteristics);
            if (!expr) continue;
            any_rule_parseable = true;
            for (const auto& lab : context.labs) {
                if (!lab_name_matches(expr->name, lab.name, options.lab_synonyms)) continue;
                if (!comparator_holds(lab.value, expr->op, expr->value)) continue;
                // Among matching constraints keep the most restrictive one.
                if (!matched || weight_for_level(item.applicability) <
                                    weight_for_level(matched->applicability)) {
                    matched = &item;
                    matched_lab = &lab;
                }
            }
        }

        if (matched) {
            decision.matched_constraint = *matched;
            decision.weight = weight_for_level(matched->applicability);
            decision.verdict = decision.weight > 0.0 ? ApplicabilityVerdict::Applicable
                                                     : ApplicabilityVerdict::NotApplicable;
            decision.rationale = "rule match: patient " + matched_lab->name + " = " +
                                 std::to_string(matched_lab->value) + " satisfies '" +
                                 matched->patient_characteristics + "'";
            decisions.push_back(std::move(decision));
            continue;
        }

        // Rules could not decide; defer to the judge when configured.
        if (gateway && !options.llm_role.empty() && gateway->has_role(options.llm_role)) {
            decisions.push_back(judge_with_llm(relation, context, *gateway, options.llm_role));
            continue;
        }

        decision.verdict = ApplicabilityVerdict::Unknown;
        decision.weight = 0.5;
        decision.rationale = any_rule_parseable
                                 ? "no patient value matches the constraint conditions"
                                 : "constraints are not rule-checkable and no judge is configured";
        decisions.push_back(std::move(decision));
    }
    return decisions;
}

}  // namespace qkg
