#include "qkg/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "qkg/constraints.hpp"
#include "qkg/csv.hpp"
#include "qkg/dataset_builder.hpp"
#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"
#include "qkg/pipeline.hpp"
#include "qkg/stats.hpp"
#include "qkg/subgraph.hpp"
#include "qkg/text.hpp"
#include "qkg/validator.hpp"
#include "qkg/version.hpp"

namespace qkg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Config precedence: CLI flag > environment variable > config file value.
std::string resolve_option(const std::string& cli_value, const char* env_name,
                           const std::string& config_value, const std::string& fallback) {
    if (!cli_value.empty()) return cli_value;
    if (env_name) {
        const char* env = std::getenv(env_name);
        if (env && *env) return env;
    }
    if (!config_value.empty()) return config_value;
    return fallback;
}

GraphFormat format_from_string(const std::string& s) {
    std::string t = to_lower(trim(s));
    if (t == "csv") return GraphFormat::Csv;
    if (t == "jsonl") return GraphFormat::Jsonl;
    throw Error("unknown graph format '" + s + "' (expected csv or jsonl)");
}

GraphFormat guess_format(const std::string& path) {
    if (path.ends_with(".csv")) return GraphFormat::Csv;
    return GraphFormat::Jsonl;
}

std::string format_p_value(double p) {
    char buf[64];
    if (p > 0 && p < 1e-3)
        std::snprintf(buf, sizeof(buf), "%.6e", p);
    else
        std::snprintf(buf, sizeof(buf), "%.4f", p);
    return buf;
}

std::shared_ptr<Backend> make_backend(const std::string& mock_script_path) {
    if (mock_script_path.empty()) return std::make_shared<HttpBackend>();
    return MockBackend::from_run_log(mock_script_path);
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::stringstream buf;
    buf << in.rdbuf();
    char out[32];
    std::snprintf(out, sizeof(out), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(buf.str())));
    return out;
}

// Every run directory gets a manifest naming inputs and config; timestamps
// live only here so the data outputs stay byte-stable.
void write_manifest(const std::string& dir, const json& inputs) {
    json manifest = {{"tool_version", kVersion},
                     {"inputs", inputs},
                     {"written_at_unix", static_cast<long long>(::time(nullptr))}};
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << "\n";
}

ValidationReport load_report_for(const std::string& reports_jsonl, const std::string& sample_id) {
    std::ifstream in(reports_jsonl);
    if (!in) throw Error("cannot open reports file: " + reports_jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        if (j.value("sample_id", "") == sample_id && j.contains("report") && !j.at("report").is_null())
            return validation_report_from_json(j.at("report").dump());
    }
    throw Error("no validation report for sample " + sample_id + " in " + reports_jsonl);
}

// ------------------------------------------------------------- subcommands

int cmd_import_kg(const std::string& input, const std::string& format_flag,
                  const std::string& out_path, const std::string& cache_path,
                  const std::vector<std::string>& column_overrides) {
    ColumnMap columns;
    for (const auto& spec : column_overrides) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw Error("column override must look like logical=header, got '" + spec + "'");
        std::string key = spec.substr(0, eq), value = spec.substr(eq + 1);
        if (key == "relation") columns.relation = value;
        else if (key == "head_index") columns.head_index = value;
        else if (key == "head_id") columns.head_id = value;
        else if (key == "head_type") columns.head_type = value;
        else if (key == "head_name") columns.head_name = value;
        else if (key == "head_source") columns.head_source = value;
        else if (key == "tail_index") columns.tail_index = value;
        else if (key == "tail_id") columns.tail_id = value;
        else if (key == "tail_type") columns.tail_type = value;
        else if (key == "tail_name") columns.tail_name = value;
        else if (key == "tail_source") columns.tail_source = value;
        else throw Error("unknown logical column '" + key + "'");
    }
    GraphFormat format = format_flag.empty() ? guess_format(input) : format_from_string(format_flag);
    LoadReport report;
    GraphStore store = load_graph(input, format, columns, &report);
    if (!out_path.empty()) save_graph_jsonl(store, out_path);
    if (!cache_path.empty()) save_graph_cache(store, cache_path);
    std::cout << "rows=" << report.rows_read << " triplets=" << report.triplets_loaded
              << " duplicates_collapsed=" << report.duplicates_collapsed
              << " entities=" << report.entities_loaded << "\n";
    return 0;
}

int cmd_extract_subgraph(const std::string& graph_path, const std::string& target,
                         const std::string& out_path) {
    GraphStore store = load_graph(graph_path, guess_format(graph_path));
    const EntityRecord* entity = store.find_by_source_id(target);
    if (!entity) throw Error("target source id not found in graph: " + target);
    Subgraph sub = build_subgraph(store, entity->index);
    SubgraphStats stats = subgraph_stats(sub);

    save_graph_jsonl(sub.merged, out_path);
    json histo_entities(stats.entity_type_histogram);
    json histo_relations(stats.relation_type_histogram);
    json j = {{"target", stats.target_source_id},
              {"target_index", stats.target_index},
              {"direct_triplets", stats.direct_triplets},
              {"intermediate_entities", stats.intermediate_entities},
              {"indirect_triplets", stats.indirect_triplets},
              {"merged_triplets", stats.merged_triplets},
              {"merged_entities_with_target", stats.merged_entities_with_target},
              {"merged_entities_without_target", stats.merged_entities_without_target},
              {"entity_type_histogram", histo_entities},
              {"relation_type_histogram", histo_relations}};
    std::ofstream stats_out(out_path + ".stats.json", std::ios::trunc);
    stats_out << j.dump(2) << "\n";

    std::cout << "direct=" << stats.direct_triplets << " e1=" << stats.intermediate_entities
              << " indirect=" << stats.indirect_triplets << " merged=" << stats.merged_triplets
              << " entities=" << stats.merged_entities_with_target << "\n";
    return 0;
}

int cmd_annotate(const std::string& graph_path, const std::string& config_path,
                 const std::string& out_path, const std::vector<std::string>& relations,
                 const std::string& prompt_path, const std::string& mock_script, int parallel) {
    GraphStore store = load_graph(graph_path, guess_format(graph_path));
    Gateway gateway(load_role_configs(config_path), make_backend(mock_script));
    AnnotateOptions options;
    if (!relations.empty()) options.relation_filter = relations;
    options.parallel = parallel;
    options.prompt_template = load_prompt_template(prompt_path);
    AnnotationResult result = annotate_relations(store, gateway, options);
    save_constraints(result.store, out_path);
    if (!result.failures.empty()) {
        std::ofstream manifest(out_path + ".failures.json", std::ios::trunc);
        json failures = json::array();
        for (const auto& failure : result.failures)
            failures.push_back({{"triplet_key", failure.key.to_string()}, {"reason", failure.reason}});
        manifest << failures.dump(2) << "\n";
    }
    std::cout << "annotated_relations=" << result.store.relation_count()
              << " facts=" << result.store.fact_count()
              << " unique_entities=" << result.store.unique_entities()
              << " failures=" << result.failures.size() << "\n";
    return 0;
}

// Optional top-level run defaults from the YAML config (lowest precedence).
struct RunDefaults {
    std::string mode;
    std::string workers;
    std::string turn_budget;
};

RunDefaults load_run_defaults(const std::string& yaml_path) {
    RunDefaults defaults;
    try {
        YAML::Node root = YAML::LoadFile(yaml_path);
        if (root["mode"]) defaults.mode = root["mode"].as<std::string>();
        if (root["workers"]) defaults.workers = root["workers"].as<std::string>();
        if (root["turn_budget"]) defaults.turn_budget = root["turn_budget"].as<std::string>();
    } catch (const YAML::Exception&) {
        // role parsing reports config errors; defaults stay empty
    }
    return defaults;
}

int cmd_run_eval(const std::string& mode_flag, const std::string& dataset_path,
                 const std::string& config_path, const std::string& graph_path,
                 const std::string& constraints_path, const std::string& out_dir,
                 const std::string& mock_script, int workers_flag, int turn_budget_flag,
                 const std::string& context_role) {
    RunDefaults defaults = load_run_defaults(config_path);
    std::string mode_str = resolve_option(mode_flag, "QKG_MODE", defaults.mode, "none");
    auto mode = eval_mode_from_string(mode_str);
    if (!mode) throw Error("unknown mode '" + mode_str + "' (expected none, kg, or qkg)");

    auto samples = load_qa_dataset(dataset_path);
    Gateway gateway(load_role_configs(config_path), make_backend(mock_script));

    PipelineConfig config;
    config.mode = *mode;
    config.context_role = context_role;
    config.workers =
        workers_flag > 0
            ? workers_flag
            : std::stoi(resolve_option("", "QKG_WORKERS", defaults.workers, "1"));
    config.turn_budget =
        turn_budget_flag > 0
            ? turn_budget_flag
            : std::stoi(resolve_option("", "QKG_TURN_BUDGET", defaults.turn_budget, "20"));

    GraphStore store;
    ConstraintStore constraints;
    PipelineEnv env;
    if (*mode != EvalMode::None) {
        if (graph_path.empty()) throw Error("--graph is required for kg/qkg modes");
        store = load_graph(graph_path, guess_format(graph_path));
        env.subgraph = &store;
        if (*mode == EvalMode::Qkg) {
            if (constraints_path.empty()) throw Error("--constraints is required for qkg mode");
            constraints = load_constraints(constraints_path);
            env.constraints = &constraints;
        }
    }

    fs::create_directories(out_dir);
    RunOutput out;
    out.results_csv = (fs::path(out_dir) / "results.csv").string();
    out.reports_jsonl = (fs::path(out_dir) / "reports.jsonl").string();
    out.summary_json = (fs::path(out_dir) / "summary.json").string();
    out.timings_csv = (fs::path(out_dir) / "timings.csv").string();
    gateway.set_run_log((fs::path(out_dir) / "run_log.jsonl").string());

    RunSummary summary = run_evaluation(samples, gateway, config, env, out);
    write_manifest(out_dir, json{{"dataset", dataset_path},
                                 {"dataset_hash", file_hash(dataset_path)},
                                 {"config", config_path},
                                 {"config_hash", file_hash(config_path)},
                                 {"graph", graph_path},
                                 {"constraints", constraints_path},
                                 {"mode", to_string(*mode)}});

    std::cout << "n=" << summary.n << " initial_acc=" << summary.initial_accuracy
              << " final_acc=" << summary.final_accuracy << " revised=" << summary.revised << " ("
              << summary.revised_pct << "%)"
              << " W->C=" << summary.w2c << " C->W=" << summary.c2w << "\n";
    return 0;
}

int cmd_compare(const std::string& run_a, const std::string& run_b, bool as_json) {
    auto rows_a = load_result_rows(run_a);
    auto rows_b = load_result_rows(run_b);
    PairedComparison cmp = compare_runs(rows_a, rows_b);
    for (const auto& warning : cmp.warnings) std::cerr << "warning: " << warning << "\n";
    double p = mcnemar_exact(cmp.b, cmp.c);
    if (as_json) {
        std::cout << json{{"n", cmp.n}, {"b", cmp.b}, {"c", cmp.c}, {"p", p}}.dump() << "\n";
    } else {
        std::cout << "N=" << cmp.n << " b=" << cmp.b << " c=" << cmp.c
                  << " p=" << format_p_value(p) << "\n";
    }
    return 0;
}

int cmd_mcnemar(std::uint64_t b, std::uint64_t c) {
    std::cout << format_p_value(mcnemar_exact(b, c)) << "\n";
    return 0;
}

int cmd_adjust(std::uint64_t final_correct, std::uint64_t n, std::uint64_t leak,
               std::uint64_t ctx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", adjusted_accuracy(final_correct, n, leak, ctx));
    std::cout << buf << "\n";
    return 0;
}

int cmd_classify_leakage(const std::string& results_path, const std::string& reports_path,
                         const std::string& out_path, const std::string& patterns_path,
                         const std::string& config_path, const std::string& relabel_role,
                         const std::string& mock_script) {
    SignalPatterns patterns =
        patterns_path.empty() ? SignalPatterns::builtin() : SignalPatterns::load(patterns_path);

    auto rows = load_result_rows(results_path);
    std::vector<LeakageCaseRow> cases;
    for (const auto& row : rows) {
        FlipDirection direction;
        char gold;
        if (row.revision == Revision::WrongToCorrect) {
            direction = FlipDirection::WrongToCorrect;
            gold = row.final_answer.empty() ? '?' : row.final_answer[0];
        } else if (row.revision == Revision::CorrectToWrong) {
            direction = FlipDirection::CorrectToWrong;
            gold = row.initial_answer.empty() ? '?' : row.initial_answer[0];
        } else {
            continue;
        }
        ValidationReport report = load_report_for(reports_path, row.sample_id);
        char initial = row.initial_answer.empty() ? '?' : row.initial_answer[0];
        cases.push_back(build_leakage_case(row.sample_id, direction, report, initial, gold, patterns));
    }

    if (!relabel_role.empty()) {
        if (config_path.empty()) throw Error("--config is required for --llm-relabel");
        Gateway gateway(load_role_configs(config_path), make_backend(mock_script));
        relabel_unclassified(cases, gateway, relabel_role);
    }
    save_case_rows(cases, out_path);

    std::map<std::string, size_t> counts;
    for (const auto& entry : cases)
        ++counts[to_string(entry.direction) + " " + to_string(final_case_class(entry))];
    for (const auto& [key, count] : counts) std::cout << key << ": " << count << "\n";
    std::cout << "cases=" << cases.size() << " -> " << out_path << "\n";
    return 0;
}

int cmd_build_dataset(const std::string& candidates_path, const std::string& graph_path,
                      const std::string& vectors_path, const std::string& text_vectors_path,
                      const std::string& hierarchy_path, const std::string& out_path,
                      size_t top_k, const std::string& config_path,
                      const std::string& context_role, const std::string& entity_role,
                      const std::string& mock_script, const std::string& stages) {
    bool run_stage[5] = {false, false, false, false, false};
    {
        // "--stages 1..4" or a comma list like "2,3".
        std::string s = stages.empty() ? "1..4" : stages;
        auto dots = s.find("..");
        if (dots != std::string::npos) {
            int lo = std::stoi(s.substr(0, dots)), hi = std::stoi(s.substr(dots + 2));
            for (int i = lo; i <= hi && i <= 4; ++i)
                if (i >= 1) run_stage[i] = true;
        } else {
            std::istringstream parts(s);
            std::string part;
            while (std::getline(parts, part, ','))
                if (int i = std::stoi(part); i >= 1 && i <= 4) run_stage[i] = true;
        }
    }

    std::ifstream in(candidates_path);
    if (!in) throw Error("cannot open candidates file: " + candidates_path);
    std::vector<CandidateSample> candidates;
    {
        auto samples = load_qa_dataset(candidates_path);
        std::ifstream raw(candidates_path);
        std::string line;
        size_t i = 0;
        while (std::getline(raw, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line);
            CandidateSample candidate;
            candidate.sample = samples.at(i++);
            if (j.contains("entity_texts"))
                candidate.entity_texts = j.at("entity_texts").get<std::vector<std::string>>();
            candidates.push_back(std::move(candidate));
        }
    }

    GraphStore store = load_graph(graph_path, guess_format(graph_path));

    std::optional<Gateway> gateway;
    if (!config_path.empty())
        gateway.emplace(load_role_configs(config_path), make_backend(mock_script));

    if (run_stage[1]) {
        auto concept_vectors = load_concept_vectors(vectors_path);
        auto text_vectors_list = load_concept_vectors(text_vectors_path);
        std::map<std::string, std::vector<double>> text_vectors(text_vectors_list.begin(),
                                                                text_vectors_list.end());
        CosineConceptIndex index =
            CosineConceptIndex::from_tables(std::move(concept_vectors), std::move(text_vectors));
        for (auto& candidate : candidates) {
            if (candidate.entity_texts.empty() && gateway)
                candidate.entity_texts =
                    extract_entity_texts(candidate.sample.question, *gateway, entity_role);
            candidate.grounded = ground_entities(candidate.entity_texts, index);
        }
    }
    if (run_stage[2]) {
        HierarchyMap hierarchy =
            hierarchy_path.empty() ? HierarchyMap{} : load_hierarchy(hierarchy_path);
        for (auto& candidate : candidates)
            candidate.grounded = align_to_kg(std::move(candidate.grounded), store, hierarchy);
    }
    if (run_stage[3]) {
        for (auto& candidate : candidates) {
            std::vector<std::int64_t> aligned;
            for (const auto& entity : candidate.grounded)
                if (entity.kg_index) aligned.push_back(*entity.kg_index);
            candidate.path_count = enumerate_onehop_paths(aligned, store).count;
        }
        candidates = rank_and_filter(std::move(candidates), top_k);
    }
    if (run_stage[4]) {
        for (auto& candidate : candidates) {
            if (candidate.sample.precomputed_context) continue;
            candidate.sample.precomputed_context =
                gateway ? extract_patient_context(candidate.sample.question, *gateway, context_role)
                        : parse_patient_context_fallback(candidate.sample.question);
        }
    }

    std::vector<QASample> selected;
    for (auto& candidate : candidates) {
        json grounding = json::array();
        for (const auto& entity : candidate.grounded) {
            json g = {{"surface", entity.surface},
                      {"concept_id", entity.concept_id},
                      {"score", entity.score},
                      {"resolved", entity.resolved}};
            if (entity.kg_index) g["kg_index"] = *entity.kg_index;
            if (entity.method)
                g["method"] = *entity.method == AlignmentMethod::Direct ? "direct" : "hierarchy";
            grounding.push_back(std::move(g));
        }
        candidate.sample.kg_grounding_json =
            json{{"entities", grounding}, {"path_count", candidate.path_count}}.dump();
        selected.push_back(candidate.sample);
    }
    save_qa_dataset(selected, out_path);
    std::cout << "selected=" << selected.size() << " -> " << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& run_dir) {
    std::ifstream in(fs::path(run_dir) / "summary.json");
    if (!in) throw Error("no summary.json under " + run_dir);
    json summary = json::parse(in);

    std::ostringstream table;
    table << "setting: mode=" << summary.value("mode", "?")
          << " validator=" << summary.value("validator_model", "") << "\n"
          << "N=" << summary.value("n", 0) << "\n"
          << "initial accuracy: " << summary.value("initial_accuracy", 0.0) << "\n"
          << "final accuracy:   " << summary.value("final_accuracy", 0.0) << "\n"
          << "revised: " << summary.value("revised", 0) << " (" << summary.value("revised_pct", 0.0)
          << "%)  W->C=" << summary.value("w2c", 0) << " C->W=" << summary.value("c2w", 0)
          << " W->W-changed=" << summary.value("w2w_changed", 0) << "\n";
    std::cout << table.str();

    std::ofstream csv(fs::path(run_dir) / "report.csv", std::ios::trunc);
    csv << "metric,value\n";
    for (const char* key : {"n", "initial_correct", "final_correct", "revised", "w2c", "c2w",
                            "w2w_changed"})
        csv << key << "," << summary.value(key, 0) << "\n";
    csv << "initial_accuracy," << summary.value("initial_accuracy", 0.0) << "\n";
    csv << "final_accuracy," << summary.value("final_accuracy", 0.0) << "\n";
    csv << "revised_pct," << summary.value("revised_pct", 0.0) << "\n";
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Context-dependent knowledge-graph validation toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // import-kg
    auto* import_cmd = app.add_subcommand("import-kg", "Import a triplet export into the JSONL graph format");
    std::string import_input, import_format, import_out, import_cache;
    std::vector<std::string> import_columns;
    import_cmd->add_option("--input", import_input, "Source file (csv or jsonl)")->required();
    import_cmd->add_option("--format", import_format, "csv | jsonl (default: by extension)");
    import_cmd->add_option("--out", import_out, "Output graph JSONL path");
    import_cmd->add_option("--cache", import_cache, "Optional binary cache path");
    import_cmd->add_option("--column", import_columns, "Column override logical=header (repeatable)");

    // extract-subgraph
    auto* extract_cmd = app.add_subcommand("extract-subgraph", "Build the two-layer subgraph around a target entity");
    std::string extract_graph, extract_target, extract_out;
    extract_cmd->add_option("--graph", extract_graph, "Graph file (csv or jsonl)")->required();
    extract_cmd->add_option("--target", extract_target, "Target entity source id, e.g. MONDO:5015")->required();
    extract_cmd->add_option("--out", extract_out, "Output subgraph JSONL path")->required();

    // annotate
    auto* annotate_cmd = app.add_subcommand("annotate", "Generate ConstraintItem records for context-sensitive relations");
    std::string annotate_graph, annotate_config, annotate_out, annotate_prompt, annotate_mock;
    std::vector<std::string> annotate_relations_flag;
    int annotate_parallel = 4;
    annotate_cmd->add_option("--graph", annotate_graph, "Subgraph JSONL")->required();
    annotate_cmd->add_option("--config", annotate_config, "Role config YAML")->required();
    annotate_cmd->add_option("--out", annotate_out, "Output constraints JSONL")->required();
    annotate_cmd->add_option("--relations", annotate_relations_flag, "Relation filter (default: the four context-sensitive types)");
    annotate_cmd->add_option("--prompt", annotate_prompt, "Annotator prompt template file")->required();
    annotate_cmd->add_option("--mock-script", annotate_mock, "Replay responses from a run log instead of HTTP");
    annotate_cmd->add_option("--parallel", annotate_parallel, "Concurrent annotation requests");

    // build-dataset
    auto* build_cmd = app.add_subcommand("build-dataset", "Run the four dataset construction stages");
    std::string build_candidates, build_graph, build_vectors, build_text_vectors, build_hierarchy,
        build_out, build_config, build_context_role = "patient-context-llm",
        build_entity_role = "annotator", build_mock, build_stages;
    size_t build_top_k = 2788;
    build_cmd->add_option("--candidates", build_candidates, "Candidate QA JSONL")->required();
    build_cmd->add_option("--graph", build_graph, "Graph JSONL")->required();
    build_cmd->add_option("--vectors", build_vectors, "Concept vector file (id<TAB>floats)");
    build_cmd->add_option("--text-vectors", build_text_vectors, "Surface-text vector file");
    build_cmd->add_option("--hierarchy", build_hierarchy, "Concept hierarchy edge list (child,parent)");
    build_cmd->add_option("--out", build_out, "Output dataset JSONL")->required();
    build_cmd->add_option("--top-k", build_top_k, "Samples to retain after ranking");
    build_cmd->add_option("--config", build_config, "Role config YAML (stage 4 LLM annotation)");
    build_cmd->add_option("--context-role", build_context_role, "Role for patient annotation");
    build_cmd->add_option("--entity-role", build_entity_role, "Role for stage-1 entity extraction");
    build_cmd->add_option("--mock-script", build_mock, "Replay responses from a run log");
    build_cmd->add_option("--stages", build_stages, "Stage selection, e.g. 1..4 or 2,3");

    // run-eval
    auto* eval_cmd = app.add_subcommand("run-eval", "Evaluate a QA dataset through the pipeline");
    std::string eval_mode, eval_dataset, eval_config, eval_graph, eval_constraints, eval_out,
        eval_mock, eval_context_role;
    int eval_workers = 0, eval_turn_budget = 0;
    eval_cmd->add_option("--mode", eval_mode, "none | kg | qkg");
    eval_cmd->add_option("--dataset", eval_dataset, "QA dataset JSONL")->required();
    eval_cmd->add_option("--config", eval_config, "Role config YAML")->required();
    eval_cmd->add_option("--graph", eval_graph, "Subgraph JSONL (kg/qkg)");
    eval_cmd->add_option("--constraints", eval_constraints, "Constraint store JSONL (qkg)");
    eval_cmd->add_option("--out-dir", eval_out, "Run output directory")->required();
    eval_cmd->add_option("--mock-script", eval_mock, "Replay responses from a run log");
    eval_cmd->add_option("--workers", eval_workers, "Concurrent samples");
    eval_cmd->add_option("--turn-budget", eval_turn_budget, "Validator tool-turn budget per round");
    eval_cmd->add_option("--context-role", eval_context_role, "Role for patient-context extraction");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "Pair two result CSVs and count discordant flips");
    std::string compare_a, compare_b;
    bool compare_json = false;
    compare_cmd->add_option("--run-a", compare_a, "Results CSV for setting A")->required();
    compare_cmd->add_option("--run-b", compare_b, "Results CSV for setting B")->required();
    compare_cmd->add_flag("--json", compare_json, "Emit JSON");

    // mcnemar
    auto* mcnemar_cmd = app.add_subcommand("mcnemar", "Exact two-sided McNemar p-value from discordant counts");
    std::uint64_t mcnemar_b = 0, mcnemar_c = 0;
    mcnemar_cmd->add_option("--b", mcnemar_b, "Correct in A, wrong in B")->required();
    mcnemar_cmd->add_option("--c", mcnemar_c, "Wrong in A, correct in B")->required();

    // classify-leakage
    auto* classify_cmd = app.add_subcommand("classify-leakage", "Label W->C / C->W revisions from their decisive evidence");
    std::string classify_results, classify_reports, classify_out, classify_patterns,
        classify_config, classify_role, classify_mock;
    classify_cmd->add_option("--results", classify_results, "Results CSV")->required();
    classify_cmd->add_option("--reports", classify_reports, "Reports JSONL")->required();
    classify_cmd->add_option("--out", classify_out, "Per-case CSV output")->required();
    classify_cmd->add_option("--patterns", classify_patterns, "Signal pattern JSON (default: built-in)");
    classify_cmd->add_option("--config", classify_config, "Role config YAML (for --llm-relabel)");
    classify_cmd->add_option("--llm-relabel", classify_role, "Role used to relabel Unclassified cases");
    classify_cmd->add_option("--mock-script", classify_mock, "Replay responses from a run log");

    // adjust
    auto* adjust_cmd = app.add_subcommand("adjust", "Leakage-adjusted accuracy");
    std::uint64_t adjust_final = 0, adjust_n = 0, adjust_leak = 0, adjust_ctx = 0;
    adjust_cmd->add_option("--final-correct", adjust_final, "Final correct count")->required();
    adjust_cmd->add_option("--n", adjust_n, "Sample count")->required();
    adjust_cmd->add_option("--leak-w2c", adjust_leak, "W->C revisions labeled likely leakage");
    adjust_cmd->add_option("--ctx-c2w", adjust_ctx, "Ctx-driven KG-supported C->W regressions");

    // report
    auto* report_cmd = app.add_subcommand("report", "Print and export the summary tables for a run directory");
    std::string report_dir;
    report_cmd->add_option("--run-dir", report_dir, "Run output directory")->required();

    std::vector<const char*> argv;
    argv.push_back("qkg");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*import_cmd)
            return cmd_import_kg(import_input, import_format, import_out, import_cache, import_columns);
        if (*extract_cmd) return cmd_extract_subgraph(extract_graph, extract_target, extract_out);
        if (*annotate_cmd)
            return cmd_annotate(annotate_graph, annotate_config, annotate_out,
                                annotate_relations_flag, annotate_prompt, annotate_mock,
                                annotate_parallel);
        if (*build_cmd)
            return cmd_build_dataset(build_candidates, build_graph, build_vectors,
                                     build_text_vectors, build_hierarchy, build_out, build_top_k,
                                     build_config, build_context_role, build_entity_role,
                                     build_mock, build_stages);
        if (*eval_cmd)
            return cmd_run_eval(eval_mode, eval_dataset, eval_config, eval_graph, eval_constraints,
                                eval_out, eval_mock, eval_workers, eval_turn_budget,
                                eval_context_role);
        if (*compare_cmd) return cmd_compare(compare_a, compare_b, compare_json);
        if (*mcnemar_cmd) return cmd_mcnemar(mcnemar_b, mcnemar_c);
        if (*classify_cmd)
            return cmd_classify_leakage(classify_results, classify_reports, classify_out,
                                        classify_patterns, classify_config, classify_role,
                                        classify_mock);
        if (*adjust_cmd) return cmd_adjust(adjust_final, adjust_n, adjust_leak, adjust_ctx);
        if (*report_cmd) return cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

}  // namespace qkg::cli
