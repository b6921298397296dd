// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Optional criteria gated on external data
// print SKIP when the data is absent. Exit status is nonzero if any
// criterion fails.

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qkg/dataset_builder.hpp"
#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"
#include "qkg/pipeline.hpp"
#include "qkg/stats.hpp"
#include "qkg/subgraph.hpp"
#include "qkg/validator.hpp"

using namespace qkg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& title, const std::function<void()>& body) {
    try {
        body();
        std::cout << "PASS  criterion " << number << ": " << title << "\n";
    } catch (const std::exception& e) {
        ++g_failures;
        std::cout << "FAIL  criterion " << number << ": " << title << " -- " << e.what() << "\n";
    }
}

void skip(int number, const std::string& title, const std::string& reason) {
    std::cout << "SKIP  criterion " << number << ": " << title << " (" << reason << ")\n";
}

void require(bool condition, const std::string& message) {
    if (!condition) throw std::runtime_error(message);
}

void require_close(double actual, double expected, double tolerance, const std::string& what) {
    if (std::abs(actual - expected) > tolerance) {
        std::ostringstream msg;
        msg << what << ": got " << actual << ", expected " << expected << " +/- " << tolerance;
        throw std::runtime_error(msg.str());
    }
}

// ---------------------------------------------------------------- fixtures

json load_fixture(const std::string& name) {
    std::ifstream in(std::string(QKG_FIXTURE_DIR) + "/" + name);
    if (!in) throw std::runtime_error("missing fixture " + name);
    return json::parse(in);
}

GraphStore tiny_subgraph() {
    GraphStore store;
    store.add_entity({1, "DB1", "", "drug", "alpha"});
    store.add_entity({2, "MONDO:1", "", "disease", "beta"});
    store.add_triplet(1, "indication", 2);
    store.freeze();
    return store;
}

Gateway make_gateway(std::shared_ptr<MockBackend> mock) {
    std::map<std::string, RoleConfig> roles;
    roles["reasoner"] = {};
    roles["validator"] = {};
    return Gateway(std::move(roles), std::move(mock));
}

QASample make_sample(const std::string& id, char gold) {
    QASample sample;
    sample.id = id;
    sample.question = "QTEXT-" + id + " Which option is best?";
    sample.choices = {{'A', "option a"}, {'B', "option b"}, {'C', "option c"}, {'D', "option d"}};
    sample.gold = gold;
    return sample;
}

std::string initial_json(char answer, const std::string& claim_marker, char claim_option,
                         bool supports) {
    return json{{"llm_answer_choice", std::string(1, answer)},
                {"selected_option_text", "option text"},
                {"reasoning", "because"},
                {"claims", json::array({{{"option", std::string(1, claim_option)},
                                         {"statement", claim_marker},
                                         {"supports", supports}}})}}
        .dump();
}

void script_sample(MockBackend& mock, const QASample& sample, char initial, bool contradict,
                   char reconsidered) {
    std::string claim_marker = "CLAIM-" + sample.id;
    mock.add_trigger({"QTEXT-" + sample.id, "Validation report"},
                     json{{"llm_answer_choice", std::string(1, reconsidered)},
                          {"selected_option_text", "revised"},
                          {"reasoning", "reconsidered"}}
                         .dump());
    mock.add_trigger(
        {claim_marker},
        json{{"final",
              json::array({{{"claim", 0},
                            {"status", contradict ? "CONTRADICTED" : "SUPPORTED"},
                            {"evidence", contradict
                                             ? "KG lacks support. Medically, the claim is wrong."
                                             : "KG confirms the indication relation."}}})}}
            .dump());
    mock.add_trigger({"QTEXT-" + sample.id}, initial_json(initial, claim_marker, initial, true));
}

double mcnemar_bruteforce(unsigned b, unsigned c) {
    unsigned n = b + c;
    if (n == 0) return 1.0;
    unsigned threshold = std::max(b, c);
    std::uint64_t extreme = 0;
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask)
        if (std::popcount(mask) >= static_cast<int>(threshold)) ++extreme;
    return std::min(1.0, 2.0 * static_cast<double>(extreme) / static_cast<double>(1ULL << n));
}

// ---------------------------------------------------------------- criteria

void criterion_1() {
    require_close(mcnemar_exact(39, 22), 0.04, 0.001, "mcnemar(39,22)");
}

void criterion_2() {
    double p = mcnemar_exact(55, 16);
    require(p <= 3.8e-6 * 1.5 && p >= 3.8e-6 / 1.5,
            "mcnemar(55,16) outside [3.8e-6 / 1.5, 3.8e-6 * 1.5]: " + std::to_string(p));
}

void criterion_3() {
    require_close(mcnemar_exact(65, 70), 0.73, 0.005, "mcnemar(65,70)");
    require_close(mcnemar_exact(33, 52), 0.05, 0.005, "mcnemar(33,52)");
}

void criterion_4() {
    for (unsigned n = 0; n <= 15; ++n)
        for (unsigned b = 0; b <= n; ++b)
            if (mcnemar_exact(b, n - b) != mcnemar_bruteforce(b, n - b))
                throw std::runtime_error("oracle mismatch at b=" + std::to_string(b) +
                                         " c=" + std::to_string(n - b));
}

void criterion_5() {
    // final_correct reconstructed as round(raw * N) from the published raw
    // accuracies; reconstruction must round-trip to the printed percentage.
    auto reconstruct = [](double raw_pct, std::uint64_t n) {
        auto count = static_cast<std::uint64_t>(std::llround(raw_pct / 100.0 * n));
        double back = std::round(10000.0 * count / n) / 100.0;
        require(back == raw_pct, "raw reconstruction round-trip failed");
        return count;
    };
    std::uint64_t no_context = reconstruct(83.25, 2788);
    std::uint64_t with_context = reconstruct(83.46, 2788);
    require(no_context == 2321 && with_context == 2327, "unexpected reconstructed counts");
    // agreement within one unit in the fourth decimal place
    require_close(adjusted_accuracy(no_context, 2788, 60, 0), 0.8288, 1e-4, "adjusted (no context)");
    require_close(adjusted_accuracy(with_context, 2788, 55, 20), 0.8375, 1e-4,
                  "adjusted (with context)");
}

void criterion_6() {
    json fixture = load_fixture("case_a.json");
    QASample sample;
    sample.id = fixture["id"];
    sample.question = "QTEXT-" + sample.id + " " + fixture["question"].get<std::string>();
    for (const auto& [letter, text] : fixture["options"].items())
        sample.choices[letter[0]] = text.get<std::string>();
    sample.gold = fixture["gold"].get<std::string>()[0];

    GraphStore subgraph = tiny_subgraph();
    PipelineConfig config;
    config.mode = EvalMode::Kg;
    PipelineEnv env{&subgraph, nullptr};

    auto scripted_initial = [&] {
        json claims = json::array();
        for (const auto& claim : fixture["claims"])
            claims.push_back({{"option", claim["option"]},
                              {"statement", claim["statement"].get<std::string>() + " CLAIM-" + sample.id},
                              {"supports", claim["supports"]}});
        return json{{"llm_answer_choice", fixture["initial_answer"]},
                    {"selected_option_text", "Influenza vaccine"},
                    {"reasoning", "more immediately overdue"},
                    {"claims", claims}}
            .dump();
    };

    // With the decisive CONTRADICTED verdict on the gold option: W->C.
    {
        auto mock = std::make_shared<MockBackend>();
        mock->add_trigger({"QTEXT-" + sample.id, "Validation report"},
                          json{{"llm_answer_choice", "D"},
                               {"selected_option_text", "Shingles vaccine"},
                               {"reasoning", "off-season influenza; never vaccinated for shingles"}}
                              .dump());
        mock->add_trigger(
            {"CLAIM-" + sample.id},
            json{{"final",
                  json::array(
                      {{{"claim", 0},
                        {"status", "NO_COVERAGE"},
                        {"evidence", ""}},
                       {{"claim", 1},
                        {"status", "CONTRADICTED"},
                        {"evidence", fixture["validator_evidence"]["D"].get<std::string>()}}})}}
                .dump());
        mock->add_trigger({"QTEXT-" + sample.id}, scripted_initial());
        Gateway gateway = make_gateway(mock);
        EvalRecord record = answer_question(sample, gateway, config, env);
        require(record.initial_answer == "B", "initial answer should be B");
        require(record.final_answer == "D", "final answer should be D after reconsideration");
        require(record.revision == Revision::WrongToCorrect, "revision should be W->C");
    }
    // Same fixture without the CONTRADICTED verdict: final = initial.
    {
        auto mock = std::make_shared<MockBackend>();
        mock->add_trigger(
            {"CLAIM-" + sample.id},
            json{{"final", json::array({{{"claim", 0}, {"status", "NO_COVERAGE"}, {"evidence", ""}},
                                        {{"claim", 1}, {"status", "NO_COVERAGE"}, {"evidence", ""}}})}}
                .dump());
        mock->add_trigger({"QTEXT-" + sample.id}, scripted_initial());
        Gateway gateway = make_gateway(mock);
        EvalRecord record = answer_question(sample, gateway, config, env);
        require(record.final_answer == record.initial_answer,
                "final must equal initial without a contradiction");
        require(record.revision == Revision::Unchanged, "revision should be unchanged");
    }
}

void criterion_7() {
    std::mt19937 rng(20260810);
    const char letters[] = {'A', 'B', 'C', 'D'};
    GraphStore subgraph = tiny_subgraph();
    for (int round = 0; round < 100; ++round) {
        auto mock = std::make_shared<MockBackend>();
        int n = std::uniform_int_distribution<int>(2, 12)(rng);
        std::vector<QASample> samples;
        for (int i = 0; i < n; ++i) {
            char gold = letters[std::uniform_int_distribution<int>(0, 3)(rng)];
            samples.push_back(
                make_sample("a" + std::to_string(round) + "_" + std::to_string(i), gold));
            script_sample(*mock, samples.back(),
                          letters[std::uniform_int_distribution<int>(0, 3)(rng)],
                          std::bernoulli_distribution(0.5)(rng),
                          letters[std::uniform_int_distribution<int>(0, 3)(rng)]);
        }
        Gateway gateway = make_gateway(mock);
        PipelineConfig config;
        config.mode = EvalMode::Kg;
        config.workers = 2;
        PipelineEnv env{&subgraph, nullptr};
        fs::path dir = fs::temp_directory_path() / ("qkg_acc7_" + std::to_string(round));
        fs::remove_all(dir);
        fs::create_directories(dir);
        RunOutput out{(dir / "results.csv").string(), "", "", ""};
        RunSummary summary = run_evaluation(samples, gateway, config, env, out);

        auto rows = load_result_rows(out.results_csv);
        size_t initial_correct = 0, final_correct = 0, w2c = 0, c2w = 0;
        for (const auto& row : rows) {
            initial_correct += row.initial_correct;
            final_correct += row.final_correct;
            w2c += row.revision == Revision::WrongToCorrect;
            c2w += row.revision == Revision::CorrectToWrong;
        }
        fs::remove_all(dir);
        require(final_correct == initial_correct + w2c - c2w,
                "accounting identity violated in run " + std::to_string(round));
        require(summary.final_correct == final_correct, "summary disagrees with the CSV");
    }
}

void criterion_8() {
    std::mt19937 rng(4242);
    for (int round = 0; round < 20; ++round) {
        // Random small graph with a constraint on one edge.
        GraphStore store;
        int n = std::uniform_int_distribution<int>(3, 8)(rng);
        for (int i = 0; i < n; ++i)
            store.add_entity({i, "E" + std::to_string(i), "", "drug", "entity " + std::to_string(i)});
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int i = 0; i < n + 2; ++i) store.add_triplet(pick(rng), "contraindication", pick(rng));
        store.freeze();
        ConstraintStore constraints;
        TripletRecord first = store.triplet(0);
        constraints.add({{store.entity(first.head).source_id, first.relation,
                          store.entity(first.tail).source_id},
                         {{"eGFR < 30", 4, "AVOID in renal impairment"}}});

        std::vector<Claim> claims = {{'A', "claim under test round " + std::to_string(round), true}};

        auto run_with = [&](const PatientContext& context) {
            auto mock = std::make_shared<MockBackend>();
            mock->push_response("validator",
                                json{{"tool", "get_relations_with_context"},
                                     {"args", {{"entities", json::array({0, 1})}}},
                                     {"claim", 0}}
                                    .dump());
            mock->push_response(
                "validator",
                json{{"final", json::array({{{"claim", 0},
                                             {"status", "SUPPORTED"},
                                             {"evidence", "KG confirms the indication relation."}}})}}
                    .dump());
            std::map<std::string, RoleConfig> roles;
            roles["validator"] = {};
            Gateway gateway(roles, mock);
            ValidatorOptions options;
            options.mode = ValidationMode::KgOnly;
            return validation_report_to_json(
                validate_claims(claims, context, store, constraints, gateway, options));
        };

        PatientContext context_a;
        context_a.age = std::uniform_int_distribution<int>(20, 90)(rng);
        context_a.sex = "female";
        context_a.labs = {{"eGFR", 25, "mL/min", std::nullopt}};
        context_a.other_factors = {"factor " + std::to_string(rng())};
        PatientContext context_b;
        context_b.age = std::uniform_int_distribution<int>(20, 90)(rng);
        context_b.labs = {{"platelet count", 95000, "/mm3", std::nullopt}};
        context_b.medications = {"drug " + std::to_string(rng())};

        std::string report_a = run_with(context_a);
        std::string report_b = run_with(context_b);
        std::string report_empty = run_with({});
        require(report_a == report_b && report_b == report_empty,
                "kg-only report changed under a patient-context permutation");
    }
}

void criterion_9() {
    auto mock = std::make_shared<MockBackend>();
    Gateway gateway = make_gateway(mock);
    PipelineConfig config;
    auto records = [](size_t n, size_t changed) {
        std::vector<EvalRecord> out(n);
        for (size_t i = 0; i < n; ++i) {
            out[i].sample_id = std::to_string(i);
            if (i < changed) {
                out[i].initial_answer = "B";
                out[i].final_answer = "A";
                out[i].initial_correct = false;
                out[i].final_correct = true;
                out[i].revision = Revision::WrongToCorrect;
            } else {
                out[i].initial_answer = "A";
                out[i].final_answer = "A";
                out[i].initial_correct = true;
                out[i].final_correct = true;
            }
        }
        return out;
    };
    require(summarize(records(2788, 61), config, gateway).revised_pct == 2.19,
            "61/2788 must report 2.19%");
    require(summarize(records(2788, 71), config, gateway).revised_pct == 2.55,
            "71/2788 must report 2.55%");
}

void criterion_10() {
    std::mt19937 rng(1234);
    for (int round = 0; round < 50; ++round) {
        GraphStore store;
        for (int i = 0; i < 30; ++i)
            store.add_entity({i, "E" + std::to_string(i), "",
                              kEntityTypes[static_cast<size_t>(i) % kEntityTypes.size()],
                              "node " + std::to_string(i)});
        std::uniform_int_distribution<int> pick(0, 29);
        int edges = std::uniform_int_distribution<int>(20, 80)(rng);
        for (int i = 0; i < edges; ++i) store.add_triplet(pick(rng), "rel", pick(rng));
        store.freeze();
        std::int64_t target = pick(rng);

        // brute-force two-layer closure
        std::set<std::tuple<std::int64_t, std::string, std::int64_t>> direct, indirect, merged;
        std::set<std::int64_t> e1;
        auto all = store.triplets();
        for (const auto& t : all)
            if (t.head == target || t.tail == target) {
                direct.insert({t.head, t.relation, t.tail});
                if (t.head != target) e1.insert(t.head);
                if (t.tail != target) e1.insert(t.tail);
            }
        for (const auto& t : all)
            if (e1.count(t.head) || e1.count(t.tail)) indirect.insert({t.head, t.relation, t.tail});
        merged = direct;
        merged.insert(indirect.begin(), indirect.end());

        Subgraph sub = build_subgraph(store, target);
        auto as_set = [&](const std::vector<size_t>& ids) {
            std::set<std::tuple<std::int64_t, std::string, std::int64_t>> out;
            for (size_t id : ids) {
                TripletRecord t = store.triplet(id);
                out.insert({t.head, t.relation, t.tail});
            }
            return out;
        };
        require(as_set(sub.direct_ids) == direct, "direct layer mismatch");
        require(as_set(sub.indirect_ids) == indirect, "indirect layer mismatch");
        require(as_set(sub.merged_ids) == merged, "merged layer mismatch");
        require(std::set<std::int64_t>(sub.intermediates.begin(), sub.intermediates.end()) == e1,
                "E1 mismatch");
    }
}

void criterion_11() {
    std::mt19937 rng(777);
    for (int round = 0; round < 50; ++round) {
        GraphStore store;
        int n = 15;
        for (int i = 0; i < n; ++i)
            store.add_entity({i, "C" + std::to_string(i), "", "disease", "e" + std::to_string(i)});
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int i = 0; i < 30; ++i) store.add_triplet(pick(rng), "rel", pick(rng));
        store.freeze();

        std::vector<std::int64_t> aligned;
        for (int i = 0; i < n; ++i)
            if (std::bernoulli_distribution(0.4)(rng)) aligned.push_back(i);
        std::set<std::int64_t> aligned_set(aligned.begin(), aligned.end());
        std::set<size_t> expected;
        if (aligned_set.size() >= 2)
            for (size_t id = 0; id < store.triplet_count(); ++id) {
                TripletRecord t = store.triplet(id);
                if (aligned_set.count(t.head) && aligned_set.count(t.tail)) expected.insert(id);
            }
        PathEnumeration result = enumerate_onehop_paths(aligned, store);
        require(result.count == expected.size() &&
                    std::set<size_t>(result.triplet_ids.begin(), result.triplet_ids.end()) ==
                        expected,
                "one-hop path enumeration disagrees with brute force");
    }

    // stable top-k with zero-path exclusion
    std::vector<CandidateSample> candidates;
    auto make_candidate = [](const std::string& id, size_t paths) {
        CandidateSample c;
        c.sample.id = id;
        c.path_count = paths;
        return c;
    };
    candidates.push_back(make_candidate("s1", 3));
    candidates.push_back(make_candidate("s2", 0));
    candidates.push_back(make_candidate("s3", 2));
    candidates.push_back(make_candidate("s4", 2));
    candidates.push_back(make_candidate("s5", 1));
    auto selected = rank_and_filter(candidates, 3);
    require(selected.size() == 3, "top-k size");
    require(selected[0].sample.id == "s1" && selected[1].sample.id == "s3" &&
                selected[2].sample.id == "s4",
            "stable ordering with id tie-break");
    for (const auto& c : rank_and_filter(candidates, 5)) require(c.path_count > 0, "zero-path kept");
}

void criterion_12(const char* csv_path) {
    LoadReport report;
    GraphStore store = load_graph(csv_path, GraphFormat::Csv, {}, &report);
    const EntityRecord* diabetes = store.find_by_source_id("MONDO:5015");
    require(diabetes != nullptr, "MONDO:5015 not present in the export");
    Subgraph sub = build_subgraph(store, diabetes->index);
    SubgraphStats stats = subgraph_stats(sub);
    require(stats.direct_triplets == 1470,
            "direct layer " + std::to_string(stats.direct_triplets) + " != 1470");
    require(stats.intermediate_entities == 735,
            "E1 " + std::to_string(stats.intermediate_entities) + " != 735");
    require(stats.indirect_triplets == 861070,
            "indirect layer " + std::to_string(stats.indirect_triplets) + " != 861070");
    require(stats.merged_triplets == 862540,
            "merged " + std::to_string(stats.merged_triplets) + " != 862540");
    require(stats.merged_entities_with_target == 18387 ||
                stats.merged_entities_without_target == 18387,
            "entities " + std::to_string(stats.merged_entities_with_target) + " != 18387");
}

void criterion_13() {
    json fixture = load_fixture("case_b.json");
    require(label_evidence(fixture["validator_evidence"]["C"]) == EvidenceLabel::EvLeakage,
            "nitrous-oxide evidence must label EvLeakage");
    require(label_evidence(fixture["validator_evidence"]["A"]) == EvidenceLabel::EvLeakage,
            "amoxicillin evidence must label EvLeakage");
    require(label_evidence("marked AVOID for this patient group") == EvidenceLabel::EvContext,
            "AVOID must label EvContext");
    // precedence: a context token overrides gap+parametric
    require(label_evidence("AVOID; KG lacks the edge. Medically, it is standard.") ==
                EvidenceLabel::EvContext,
            "context must take precedence");
    // case sensitivity of the uppercase tokens
    require(label_evidence("avoid strenuous exercise") != EvidenceLabel::EvContext,
            "lowercase avoid must not fire");
    SignalSet negative = SignalPatterns::builtin().detect("evidence-based applicability for this trial");
    require(!negative.context, "the bare token 'applicability' must not fire CONTEXT");
}

struct Table3Row {
    size_t kg_supported = 0, ctx = 0, mixed = 0, leakage = 0;
};

Table3Row tally(const std::vector<LeakageCaseRow>& rows, FlipDirection direction) {
    Table3Row out;
    for (const auto& row : rows) {
        if (row.direction != direction) continue;
        switch (final_case_class(row)) {
            case CaseClass::LikelyKgSupported:
                ++out.kg_supported;
                if (row.ctx_driven) ++out.ctx;
                break;
            case CaseClass::Mixed: ++out.mixed; break;
            case CaseClass::LikelyLeakage: ++out.leakage; break;
            case CaseClass::Unclassified: break;
        }
    }
    return out;
}

void criterion_14(const std::string& dir) {
    auto check_run = [&](const std::string& file, Table3Row w2c_expected, Table3Row c2w_expected) {
        auto rows = load_case_rows((fs::path(dir) / file).string());
        Table3Row w2c = tally(rows, FlipDirection::WrongToCorrect);
        Table3Row c2w = tally(rows, FlipDirection::CorrectToWrong);
        auto mismatch = [&](const char* what, size_t got, size_t expected) {
            if (got != expected)
                throw std::runtime_error(file + " " + what + ": got " + std::to_string(got) +
                                         ", expected " + std::to_string(expected));
        };
        mismatch("W->C kg-supported", w2c.kg_supported, w2c_expected.kg_supported);
        mismatch("W->C ctx", w2c.ctx, w2c_expected.ctx);
        mismatch("W->C mixed", w2c.mixed, w2c_expected.mixed);
        mismatch("W->C leakage", w2c.leakage, w2c_expected.leakage);
        mismatch("C->W kg-supported", c2w.kg_supported, c2w_expected.kg_supported);
        mismatch("C->W ctx", c2w.ctx, c2w_expected.ctx);
        mismatch("C->W mixed", c2w.mixed, c2w_expected.mixed);
        mismatch("C->W leakage", c2w.leakage, c2w_expected.leakage);
    };
    check_run("cases_kg.csv", {97, 0, 20, 60}, {12, 0, 0, 4});
    check_run("cases_qkg.csv", {123, 27, 26, 55}, {36, 20, 1, 1});
}

}  // namespace

int main() {
    criterion(1, "mcnemar_exact(39, 22) = 0.04 +/- 0.001", criterion_1);
    criterion(2, "mcnemar_exact(55, 16) ~ 3.8e-6 within a factor of 1.5", criterion_2);
    criterion(3, "mcnemar_exact(65, 70) = 0.73 +/- 0.005 and (33, 52) = 0.05 +/- 0.005",
              criterion_3);
    criterion(4, "mcnemar_exact equals brute-force enumeration for all b+c <= 15", criterion_4);
    criterion(5, "adjusted accuracies 0.8288 / 0.8375 from reconstructed counts", criterion_5);
    criterion(6, "scripted W->C revision; no contradiction keeps the initial answer", criterion_6);
    criterion(7, "accounting identity over 100 random mock runs", criterion_7);
    criterion(8, "kg-only reports invariant under patient-context changes (20 fixtures)",
              criterion_8);
    criterion(9, "revision rates 61/2788 -> 2.19% and 71/2788 -> 2.55%", criterion_9);
    criterion(10, "two-layer subgraph equals the set-algebra oracle on 50 random graphs",
              criterion_10);
    criterion(11, "one-hop paths equal brute force on 50 fixtures; stable zero-path top-k",
              criterion_11);

    if (const char* primekg = std::getenv("QKG_PRIMEKG_CSV"); primekg && *primekg)
        criterion(12, "diabetes subgraph counts 1470 / 735 / 861070 / 862540 / 18387",
                  [&] { criterion_12(primekg); });
    else
        skip(12, "diabetes subgraph counts", "optional; set QKG_PRIMEKG_CSV to the full export");

    criterion(13, "evidence labeling: leakage cases, AVOID, precedence, token case rules",
              criterion_13);

    if (const char* cases = std::getenv("QKG_RELEASED_CASES_DIR"); cases && *cases)
        criterion(14, "per-case CSV class totals", [&] { criterion_14(cases); });
    else
        skip(14, "per-case CSV class totals",
             "optional; set QKG_RELEASED_CASES_DIR to the released cases");

    if (g_failures) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
