#include <doctest.h>

#include <random>

#include "qkg/patient_context.hpp"

using namespace qkg;

namespace {

RelationWithConstraints relation_with(std::vector<ConstraintItem> items) {
    RelationWithConstraints r;
    r.triplet = {1, "contraindication", 2};
    r.key = {"DB001", "contraindication", "MONDO:1"};
    r.constraints = std::move(items);
    return r;
}

}  // namespace

TEST_SUITE("patient_context") {

TEST_CASE("empty question yields an empty context") {
    PatientContext context = parse_patient_context_fallback("");
    CHECK(context.empty());
}

TEST_CASE("fallback extracts age and sex from a vignette") {
    PatientContext context = parse_patient_context_fallback(
        "A 62-year-old woman is seen in June for a routine check-up.");
    REQUIRE(context.age.has_value());
    CHECK(*context.age == 62);
    REQUIRE(context.sex.has_value());
    CHECK(*context.sex == "female");
}

TEST_CASE("fallback is not fooled by 'woman' containing 'man'") {
    PatientContext context = parse_patient_context_fallback("The woman presented alone.");
    REQUIRE(context.sex.has_value());
    CHECK(*context.sex == "female");
    PatientContext male = parse_patient_context_fallback("A 70 year old man with chest pain.");
    CHECK(*male.sex == "male");
    CHECK(*male.age == 70);
}

TEST_CASE("fallback extracts the platelet count with comma separators") {
    PatientContext context = parse_patient_context_fallback(
        "On arrival the patient has a platelet count of 95,000/mm3 and is otherwise stable.");
    REQUIRE(context.labs.size() == 1);
    CHECK(context.labs[0].name == "platelet count");
    CHECK(context.labs[0].value == 95000.0);
    CHECK(context.labs[0].unit == "/mm3");
}

TEST_CASE("fallback extracts labs with comparators and percents") {
    PatientContext context = parse_patient_context_fallback(
        "Labs: eGFR of 25 mL/min, HbA1c is 9.5% on metformin.");
    REQUIRE(context.labs.size() == 2);
    CHECK(context.labs[0].name == "egfr");
    CHECK(context.labs[0].value == 25.0);
    CHECK(context.labs[1].name == "hba1c");
    CHECK(context.labs[1].value == 9.5);
    CHECK(context.labs[1].unit == "%");
}

TEST_CASE("json round trip preserves all fields") {
    PatientContext context;
    context.age = 62;
    context.sex = "female";
    context.diagnoses = {"type 2 diabetes"};
    context.labs = {{"platelet count", 95000, "/mm3", Comparator::Eq}};
    context.medications = {"metformin"};
    context.other_factors = {"smoking"};
    PatientContext loaded = patient_context_from_json(patient_context_to_json(context));
    CHECK(loaded == context);
}

TEST_CASE("llm extraction degrades to the fallback parser") {
    auto mock = std::make_shared<MockBackend>();  // Error policy, nothing scripted
    std::map<std::string, RoleConfig> roles;
    roles["patient-context-llm"] = {};
    roles["patient-context-llm"].max_retries = 0;
    Gateway gateway(roles, mock);
    PatientContext context = extract_patient_context(
        "A 45-year-old man with an eGFR of 25 mL/min.", gateway, "patient-context-llm");
    CHECK(context.age == 45.0);
    REQUIRE(context.labs.size() == 1);
    CHECK(context.labs[0].name == "egfr");
}

TEST_CASE("llm extraction used when the role answers") {
    auto mock = std::make_shared<MockBackend>();
    mock->push_response("patient-context-llm",
                        R"({"age": 62, "sex": "female", "diagnoses": ["hypertension"], "labs": [], "medications": ["lisinopril"], "other_factors": []})");
    std::map<std::string, RoleConfig> roles;
    roles["patient-context-llm"] = {};
    Gateway gateway(roles, mock);
    PatientContext context = extract_patient_context("irrelevant", gateway, "patient-context-llm");
    CHECK(context.age == 62.0);
    CHECK(context.diagnoses == std::vector<std::string>{"hypertension"});
    CHECK(context.medications == std::vector<std::string>{"lisinopril"});
}

// --------------------------------------------------------------- rule match

TEST_CASE("comparator expressions parse and richer text does not") {
    auto expr = parse_constraint_expr("eGFR < 30");
    REQUIRE(expr.has_value());
    CHECK(expr->name == "eGFR");
    CHECK(expr->op == Comparator::Lt);
    CHECK(expr->value == 30.0);

    auto with_unit = parse_constraint_expr("platelet count < 100,000 /mm3");
    REQUIRE(with_unit.has_value());
    CHECK(with_unit->value == 100000.0);

    CHECK_FALSE(parse_constraint_expr("eGFR < 30 and age > 70").has_value());
    CHECK_FALSE(parse_constraint_expr("history of smoking with recent ciprofloxacin").has_value());
    CHECK_FALSE(parse_constraint_expr("pregnancy").has_value());
}

TEST_CASE("satisfied comparator yields applicable with full weight") {
    PatientContext context;
    context.labs = {{"eGFR", 25, "mL/min", std::nullopt}};
    auto relations = std::vector<RelationWithConstraints>{
        relation_with({{"eGFR < 30", 0, "renal dosing"}})};
    auto decisions = apply_constraint_items(relations, context);
    REQUIRE(decisions.size() == 1);
    CHECK(decisions[0].verdict == ApplicabilityVerdict::Applicable);
    CHECK(decisions[0].weight == 1.0);
    REQUIRE(decisions[0].matched_constraint.has_value());
    CHECK(decisions[0].matched_constraint->patient_characteristics == "eGFR < 30");
}

TEST_CASE("relation with no constraints stays unknown at the default weight") {
    PatientContext context;
    auto relations = std::vector<RelationWithConstraints>{relation_with({})};
    auto decisions = apply_constraint_items(relations, context);
    CHECK(decisions[0].verdict == ApplicabilityVerdict::Unknown);
    CHECK(decisions[0].weight == 0.5);
    CHECK_FALSE(decisions[0].matched_constraint.has_value());
}

TEST_CASE("matching a bottom-ordinal constraint excludes the relation") {
    PatientContext context;
    context.labs = {{"platelet count", 95000, "/mm3", std::nullopt}};
    auto relations = std::vector<RelationWithConstraints>{
        relation_with({{"platelet count < 100,000 /mm3", 4, "AVOID in thrombocytopenia"}})};
    auto decisions = apply_constraint_items(relations, context);
    CHECK(decisions[0].verdict == ApplicabilityVerdict::NotApplicable);
    CHECK(decisions[0].weight == 0.0);
    REQUIRE(decisions[0].matched_constraint.has_value());
}

TEST_CASE("empty context never produces not_applicable from the rule path") {
    std::mt19937 rng(13);
    std::uniform_int_distribution<int> ordinal(0, 4);
    std::uniform_int_distribution<int> value(1, 200);
    for (int i = 0; i < 50; ++i) {
        auto relations = std::vector<RelationWithConstraints>{relation_with(
            {{"eGFR < " + std::to_string(value(rng)), ordinal(rng), ""},
             {"HbA1c > " + std::to_string(value(rng)), ordinal(rng), ""}})};
        auto decisions = apply_constraint_items(relations, PatientContext{});
        CHECK(decisions[0].verdict == ApplicabilityVerdict::Unknown);
    }
}

TEST_CASE("rule decisions are pure functions of constraint and context") {
    PatientContext context;
    context.labs = {{"eGFR", 25, "mL/min", std::nullopt}};
    auto relations = std::vector<RelationWithConstraints>{
        relation_with({{"eGFR < 30", 1, ""}}), relation_with({{"eGFR < 20", 1, ""}})};
    auto first = apply_constraint_items(relations, context);
    auto second = apply_constraint_items(relations, context);
    REQUIRE(first.size() == second.size());
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].verdict == second[i].verdict);
        CHECK(first[i].weight == second[i].weight);
        CHECK(first[i].rationale == second[i].rationale);
    }
    CHECK(first[1].verdict == ApplicabilityVerdict::Unknown);  // 25 >= 20
}

TEST_CASE("weight map is monotone in the applicability ordinal") {
    for (int a = 0; a < 4; ++a) CHECK(weight_for_level(a) >= weight_for_level(a + 1));
    PatientContext context;
    context.labs = {{"eGFR", 25, "mL/min", std::nullopt}};
    double last = 2.0;
    for (int ordinal = 0; ordinal <= 4; ++ordinal) {
        auto relations = std::vector<RelationWithConstraints>{
            relation_with({{"eGFR < 30", ordinal, ""}})};
        auto decisions = apply_constraint_items(relations, context);
        CHECK(decisions[0].weight <= last);
        last = decisions[0].weight;
    }
}

TEST_CASE("synonym table bridges lab names") {
    CHECK(lab_name_matches("platelets", "platelet count"));
    CHECK(lab_name_matches("Platelet Count", "platelet count"));
    CHECK(lab_name_matches("WBC", "white blood cell count"));
    CHECK_FALSE(lab_name_matches("eGFR", "platelet count"));
    CHECK(lab_name_matches("SCr", "serum creatinine", {{"SCr", "serum creatinine"}}));

    PatientContext context;
    context.labs = {{"platelets", 95000, "/mm3", std::nullopt}};
    auto relations = std::vector<RelationWithConstraints>{
        relation_with({{"platelet count < 100,000", 0, ""}})};
    auto decisions = apply_constraint_items(relations, context);
    CHECK(decisions[0].verdict == ApplicabilityVerdict::Applicable);
}

TEST_CASE("undecidable constraints go to the llm judge when configured") {
    auto mock = std::make_shared<MockBackend>();
    mock->push_response("judge",
                        R"({"verdict": "not_applicable", "constraint_index": 0, "rationale": "compositional risk factors all present"})");
    std::map<std::string, RoleConfig> roles;
    roles["judge"] = {};
    Gateway gateway(roles, mock);

    PatientContext context;
    context.age = 62;
    context.other_factors = {"smoking", "alcohol use", "recent ciprofloxacin"};
    auto relations = std::vector<RelationWithConstraints>{relation_with(
        {{"older adults who smoke and drink within weeks of fluoroquinolone exposure", 4, ""}})};
    ApplyOptions options;
    options.llm_role = "judge";
    auto decisions = apply_constraint_items(relations, context, &gateway, options);
    CHECK(decisions[0].verdict == ApplicabilityVerdict::NotApplicable);
    CHECK(decisions[0].weight == 0.0);
    REQUIRE(decisions[0].matched_constraint.has_value());
}

TEST_CASE("judge failure degrades the item to unknown with a note") {
    auto mock = std::make_shared<MockBackend>();  // nothing scripted: every call fails
    std::map<std::string, RoleConfig> roles;
    roles["judge"] = {};
    roles["judge"].max_retries = 0;
    Gateway gateway(roles, mock);
    PatientContext context;
    context.age = 80;
    auto relations = std::vector<RelationWithConstraints>{
        relation_with({{"frailty with polypharmacy", 3, ""}})};
    ApplyOptions options;
    options.llm_role = "judge";
    auto decisions = apply_constraint_items(relations, context, &gateway, options);
    CHECK(decisions[0].verdict == ApplicabilityVerdict::Unknown);
    CHECK(decisions[0].weight == 0.5);
    CHECK(decisions[0].rationale.find("llm judge unavailable") != std::string::npos);
}

}  // TEST_SUITE
