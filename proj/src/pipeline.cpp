#include "qkg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <set>

#include <nlohmann/json.hpp>

#include "qkg/csv.hpp"
#include "qkg/text.hpp"

namespace qkg {

using nlohmann::json;

// ------------------------------------------------------------------ dataset

std::vector<QASample> load_qa_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset: " + path);
    std::vector<QASample> samples;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("dataset line " + std::to_string(line_no) + ": malformed JSON");
        QASample sample;
        sample.id = j.value("id", "");
        if (sample.id.empty())
            throw Error("dataset line " + std::to_string(line_no) + ": missing 'id'");
        sample.question = j.value("question", "");
        if (!j.contains("choices") || !j.at("choices").is_object())
            throw Error("dataset line " + std::to_string(line_no) + ": missing 'choices'");
        for (const auto& [key, value] : j.at("choices").items()) {
            if (key.size() != 1 || key[0] < 'A' || key[0] > 'J')
                throw Error("dataset line " + std::to_string(line_no) + ": bad choice key '" + key + "'");
            sample.choices[key[0]] = value.get<std::string>();
        }
        if (sample.choices.size() < 2)
            throw Error("dataset line " + std::to_string(line_no) + ": fewer than 2 choices");
        std::string gold = j.value("gold", "");
        if (gold.size() != 1 || !sample.choices.count(gold[0]))
            throw Error("dataset line " + std::to_string(line_no) + ": gold answer not among choices");
        sample.gold = gold[0];
        if (j.contains("patient_context") && j.at("patient_context").is_object())
            sample.precomputed_context = patient_context_from_json(j.at("patient_context").dump());
        if (j.contains("kg_grounding")) sample.kg_grounding_json = j.at("kg_grounding").dump();
        samples.push_back(std::move(sample));
    }
    return samples;
}

void save_qa_dataset(const std::vector<QASample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write dataset: " + path);
    for (const auto& sample : samples) {
        json choices = json::object();
        for (const auto& [letter, text] : sample.choices) choices[std::string(1, letter)] = text;
        json j = {{"id", sample.id},
                  {"question", sample.question},
                  {"choices", choices},
                  {"gold", std::string(1, sample.gold)}};
        if (sample.precomputed_context)
            j["patient_context"] = json::parse(patient_context_to_json(*sample.precomputed_context));
        if (sample.kg_grounding_json) j["kg_grounding"] = json::parse(*sample.kg_grounding_json);
        out << j.dump() << "\n";
    }
}

// -------------------------------------------------------------------- enums

std::string to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::None: return "none";
        case EvalMode::Kg: return "kg";
        case EvalMode::Qkg: return "qkg";
    }
    return "none";
}

std::optional<EvalMode> eval_mode_from_string(const std::string& s) {
    std::string t = to_lower(trim(s));
    if (t == "none") return EvalMode::None;
    if (t == "kg") return EvalMode::Kg;
    if (t == "qkg") return EvalMode::Qkg;
    return std::nullopt;
}

std::string to_string(Revision revision) {
    switch (revision) {
        case Revision::Unchanged: return "unchanged";
        case Revision::WrongToCorrect: return "W->C";
        case Revision::CorrectToWrong: return "C->W";
        case Revision::WrongToWrongChanged: return "W->W-changed";
    }
    return "unchanged";
}

std::optional<Revision> revision_from_string(const std::string& s) {
    std::string t = trim(s);
    if (t == "unchanged") return Revision::Unchanged;
    if (t == "W->C") return Revision::WrongToCorrect;
    if (t == "C->W") return Revision::CorrectToWrong;
    if (t == "W->W-changed") return Revision::WrongToWrongChanged;
    return std::nullopt;
}

Revision classify_revision(bool initial_correct, bool final_correct,
                           const std::string& initial_answer, const std::string& final_answer) {
    if (initial_answer == final_answer) return Revision::Unchanged;
    if (!initial_correct && final_correct) return Revision::WrongToCorrect;
    if (initial_correct && !final_correct) return Revision::CorrectToWrong;
    return Revision::WrongToWrongChanged;
}

// ---------------------------------------------------------------- reasoning

namespace {

constexpr const char* kReasonerSystemPrompt =
    R"(Answer the multiple-choice clinical question. Reply with one JSON object:
{"llm_answer_choice": "<letter>", "selected_option_text": "<text of that option>", "reasoning": "<your reasoning>",
 "claims": [{"option": "<letter>", "statement": "<one verifiable claim about that option>", "supports": true|false}, ...]}
Emit one claim per option you relied on: supports=true when the claim argues for the option, supports=false when it argues for eliminating it.)";

constexpr const char* kReconsiderInstruction =
    R"(A knowledge-graph validator checked your claims; its report follows. Reconsider your answer in light of the CONTRADICTED findings and reply with the same JSON schema (claims optional).)";

std::string render_question(const QASample& sample) {
    std::string text = sample.question;
    text += "\n\nOptions:\n";
    for (const auto& [letter, option] : sample.choices) {
        text.push_back(letter);
        text += ") " + option + "\n";
    }
    return text;
}

std::vector<Claim> parse_claims(const std::string& raw) {
    std::vector<Claim> claims;
    json j = json::parse(extract_first_json_object(raw));
    if (!j.contains("claims") || !j.at("claims").is_array()) return claims;
    for (const auto& c : j.at("claims")) {
        if (!c.is_object()) continue;
        std::string option = c.value("option", "");
        if (option.size() != 1) continue;
        char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(option[0])));
        if (letter < 'A' || letter > 'J') continue;
        claims.push_back({letter, c.value("statement", ""), c.value("supports", true)});
    }
    return claims;
}

struct ReasonerTurn {
    QAResponse response;
    std::vector<Claim> claims;
};

// Asks the reasoner and re-asks on schema violations, up to `retries` extra
// attempts. Throws after the last failure.
ReasonerTurn ask_reasoner(Gateway& gateway, const std::string& role,
                          std::vector<Message> messages, int retries) {
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        std::string raw = gateway.complete(role, messages);
        try {
            ReasonerTurn turn;
            turn.response = parse_qa_response(raw);
            turn.claims = parse_claims(raw);
            return turn;
        } catch (const Error& e) {
            last_error = e.what();
            messages.push_back({"assistant", raw});
            messages.push_back({"user", std::string("That reply failed validation (") + e.what() +
                                            "). Reply again with exactly the requested JSON schema."});
        }
    }
    throw ValidationError("reasoner output unparseable after retries: " + last_error);
}

}  // namespace

EvalRecord answer_question(const QASample& sample, Gateway& gateway, const PipelineConfig& config,
                           const PipelineEnv& env) {
    auto start = std::chrono::steady_clock::now();
    EvalRecord record;
    record.sample_id = sample.id;

    PatientContext context;
    if (config.mode == EvalMode::Qkg) {
        context = sample.precomputed_context
                      ? *sample.precomputed_context
                      : extract_patient_context(sample.question, gateway, config.context_role);
    }

    const std::string question = render_question(sample);
    std::string gold(1, sample.gold);

    std::vector<Message> initial_messages = {{"system", kReasonerSystemPrompt},
                                             {"user", question}};
    ReasonerTurn initial;
    try {
        initial = ask_reasoner(gateway, config.reasoner_role, initial_messages,
                               config.answer_parse_retries);
    } catch (const Error&) {
        // Invalid answers count as incorrect; the sample is never dropped.
        record.invalid_answer = true;
        record.revision = Revision::Unchanged;
        record.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
        return record;
    }

    record.initial_answer = std::string(1, initial.response.llm_answer_choice);
    record.initial_correct = record.initial_answer == gold;
    record.claims = initial.claims;

    record.final_answer = record.initial_answer;
    record.final_correct = record.initial_correct;

    if (config.mode != EvalMode::None) {
        ValidatorOptions options;
        options.role = config.validator_role;
        options.mode = config.mode == EvalMode::Kg ? ValidationMode::KgOnly
                                                   : ValidationMode::QkgWithContext;
        options.turn_budget = config.turn_budget;
        options.apply_options = config.apply_options;
        static const ConstraintStore empty_constraints;
        const ConstraintStore& constraints =
            (config.mode == EvalMode::Qkg && env.constraints) ? *env.constraints : empty_constraints;
        if (!env.subgraph) throw Error("validation mode requires a loaded subgraph");
        record.report =
            validate_claims(record.claims, context, *env.subgraph, constraints, gateway, options);

        ValidationReport current = *record.report;
        QAResponse last_response = initial.response;
        std::vector<Claim> last_claims = record.claims;
        const int rounds = std::max(1, config.max_reconsider_rounds);
        for (int round = 0; round < rounds && current.any_contradicted(); ++round) {
            auto choice_text = [&](char letter) {
                auto it = sample.choices.find(letter);
                return it == sample.choices.end() ? std::string() : it->second;
            };
            std::vector<Message> reconsider_messages = {
                {"system", kReasonerSystemPrompt},
                {"user", question},
                {"assistant", json{{"llm_answer_choice",
                                    std::string(1, last_response.llm_answer_choice)},
                                   {"selected_option_text",
                                    choice_text(last_response.llm_answer_choice)},
                                   {"reasoning", last_response.reasoning}}
                                  .dump()},
                {"user", std::string(kReconsiderInstruction) + "\n\nValidation report:\n" +
                             validation_report_to_json(current)}};
            try {
                ReasonerTurn reconsidered = ask_reasoner(gateway, config.reasoner_role,
                                                         reconsider_messages,
                                                         config.answer_parse_retries);
                record.final_answer = std::string(1, reconsidered.response.llm_answer_choice);
                last_response = reconsidered.response;
                if (!reconsidered.claims.empty()) last_claims = reconsidered.claims;
            } catch (const Error&) {
                record.invalid_answer = true;
                record.final_answer = "";
                break;
            }
            if (round + 1 < rounds)
                current = validate_claims(last_claims, context, *env.subgraph, constraints,
                                          gateway, options);
        }
        record.final_correct = record.final_answer == gold;
    }

    record.revision = classify_revision(record.initial_correct, record.final_correct,
                                        record.initial_answer, record.final_answer);
    record.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    return record;
}

// ------------------------------------------------------------------ summary

RunSummary summarize(const std::vector<EvalRecord>& records, const PipelineConfig& config,
                     Gateway& gateway) {
    RunSummary summary;
    summary.n = records.size();
    summary.mode = config.mode;
    if (gateway.has_role(config.reasoner_role))
        summary.reasoner_model = gateway.config(config.reasoner_role).model;
    if (config.mode != EvalMode::None && gateway.has_role(config.validator_role))
        summary.validator_model = gateway.config(config.validator_role).model;
    for (const auto& record : records) {
        summary.initial_correct += record.initial_correct ? 1 : 0;
        summary.final_correct += record.final_correct ? 1 : 0;
        switch (record.revision) {
            case Revision::Unchanged: break;
            case Revision::WrongToCorrect: ++summary.w2c; break;
            case Revision::CorrectToWrong: ++summary.c2w; break;
            case Revision::WrongToWrongChanged: ++summary.w2w_changed; break;
        }
    }
    summary.revised = summary.w2c + summary.c2w + summary.w2w_changed;
    if (summary.n > 0) {
        summary.initial_accuracy =
            static_cast<double>(summary.initial_correct) / static_cast<double>(summary.n);
        summary.final_accuracy =
            static_cast<double>(summary.final_correct) / static_cast<double>(summary.n);
        summary.revised_pct =
            std::round(10000.0 * static_cast<double>(summary.revised) /
                       static_cast<double>(summary.n)) /
            100.0;
    }
    return summary;
}

// ------------------------------------------------------------------ CSV I/O

const std::vector<std::string> kResultCsvColumns = {
    "sample_id",    "initial_answer", "initial_correct", "final_answer",
    "final_correct", "revision",      "mode",            "validator_model",
};

namespace {

ResultRow row_from_record(const EvalRecord& record, EvalMode mode,
                          const std::string& validator_model) {
    return ResultRow{record.sample_id,   record.initial_answer, record.initial_correct,
                     record.final_answer, record.final_correct,  record.revision,
                     mode,               validator_model};
}

std::vector<std::string> row_fields(const ResultRow& row) {
    return {row.sample_id,
            row.initial_answer,
            row.initial_correct ? "1" : "0",
            row.final_answer,
            row.final_correct ? "1" : "0",
            to_string(row.revision),
            to_string(row.mode),
            row.validator_model};
}

}  // namespace

std::vector<ResultRow> load_result_rows(const std::string& csv_path) {
    auto rows = read_csv(csv_path);
    if (rows.empty()) throw Error("empty results csv: " + csv_path);
    if (rows[0] != kResultCsvColumns)
        throw Error("unrecognized results csv header in " + csv_path);
    std::vector<ResultRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& fields = rows[i];
        if (fields.size() != kResultCsvColumns.size())
            throw Error("results csv row " + std::to_string(i + 1) + ": wrong field count");
        ResultRow row;
        row.sample_id = fields[0];
        row.initial_answer = fields[1];
        row.initial_correct = fields[2] == "1";
        row.final_answer = fields[3];
        row.final_correct = fields[4] == "1";
        auto revision = revision_from_string(fields[5]);
        if (!revision)
            throw Error("results csv row " + std::to_string(i + 1) + ": bad revision '" + fields[5] + "'");
        row.revision = *revision;
        auto mode = eval_mode_from_string(fields[6]);
        if (!mode)
            throw Error("results csv row " + std::to_string(i + 1) + ": bad mode '" + fields[6] + "'");
        row.mode = *mode;
        row.validator_model = fields[7];
        out.push_back(std::move(row));
    }
    return out;
}

void save_result_rows(const std::vector<ResultRow>& rows, const std::string& csv_path) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw Error("cannot write results csv: " + csv_path);
    out << csv_join(kResultCsvColumns) << "\n";
    for (const auto& row : rows) out << csv_join(row_fields(row)) << "\n";
}

// --------------------------------------------------------------- evaluation

RunSummary run_evaluation(const std::vector<QASample>& samples, Gateway& gateway,
                          const PipelineConfig& config, const PipelineEnv& env,
                          const RunOutput& out) {
    // Resume state: rows (and report lines) already on disk are reused.
    std::map<std::string, ResultRow> existing_rows;
    {
        std::ifstream probe(out.results_csv);
        if (probe.good()) {
            probe.close();
            for (auto& row : load_result_rows(out.results_csv))
                existing_rows.emplace(row.sample_id, std::move(row));
        }
    }
    std::map<std::string, std::string> existing_reports;
    {
        std::ifstream in(out.reports_jsonl);
        std::string line;
        while (in && std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.contains("sample_id"))
                existing_reports.emplace(j.at("sample_id").get<std::string>(), line);
        }
    }

    const std::string validator_model =
        (config.mode != EvalMode::None && gateway.has_role(config.validator_role))
            ? gateway.config(config.validator_role).model
            : "";

    const size_t n = samples.size();
    const size_t window = static_cast<size_t>(std::max(1, config.workers));

    bool fresh_results = existing_rows.empty();
    std::ofstream csv_out(out.results_csv, fresh_results ? std::ios::trunc : std::ios::app);
    if (!csv_out) throw Error("cannot write results csv: " + out.results_csv);
    if (fresh_results) csv_out << csv_join(kResultCsvColumns) << "\n";
    std::ofstream reports_out(out.reports_jsonl,
                              existing_reports.empty() ? std::ios::trunc : std::ios::app);
    std::ofstream timings_out;
    if (!out.timings_csv.empty()) {
        timings_out.open(out.timings_csv, std::ios::trunc);
        timings_out << "sample_id,timing_ms\n";
    }

    std::vector<ResultRow> all_rows(n);
    std::vector<std::optional<std::future<EvalRecord>>> futures(n);
    size_t launched = 0;
    auto ensure_launched = [&](size_t upto) {
        for (; launched < std::min(n, upto); ++launched) {
            size_t i = launched;
            if (existing_rows.count(samples[i].id)) continue;
            futures[i] = std::async(std::launch::async, [&, i]() -> EvalRecord {
                try {
                    return answer_question(samples[i], gateway, config, env);
                } catch (const std::exception&) {
                    // Never drop a sample: record the failure as an invalid answer.
                    EvalRecord record;
                    record.sample_id = samples[i].id;
                    record.invalid_answer = true;
                    record.revision = Revision::Unchanged;
                    return record;
                }
            });
        }
    };

    for (size_t i = 0; i < n; ++i) {
        ensure_launched(i + window);
        auto it = existing_rows.find(samples[i].id);
        if (it != existing_rows.end()) {
            all_rows[i] = it->second;
            continue;
        }
        EvalRecord record = futures[i]->get();
        futures[i].reset();
        all_rows[i] = row_from_record(record, config.mode, validator_model);

        csv_out << csv_join(row_fields(all_rows[i])) << "\n";
        csv_out.flush();

        json claims = json::array();
        for (const auto& claim : record.claims)
            claims.push_back({{"option", std::string(1, claim.option_label)},
                              {"statement", claim.statement},
                              {"supports", claim.supports}});
        json line = {{"sample_id", record.sample_id},
                     {"invalid_answer", record.invalid_answer},
                     {"claims", claims},
                     {"report", record.report
                                    ? json::parse(validation_report_to_json(*record.report))
                                    : json()}};
        reports_out << line.dump() << "\n";
        reports_out.flush();

        if (timings_out.is_open())
            timings_out << record.sample_id << "," << record.timing_ms << "\n";
    }

    // Summary over the full row set (resumed and fresh alike).
    std::vector<EvalRecord> for_summary;
    for_summary.reserve(n);
    for (const auto& row : all_rows) {
        EvalRecord record;
        record.sample_id = row.sample_id;
        record.initial_answer = row.initial_answer;
        record.initial_correct = row.initial_correct;
        record.final_answer = row.final_answer;
        record.final_correct = row.final_correct;
        record.revision = row.revision;
        for_summary.push_back(std::move(record));
    }
    RunSummary summary = summarize(for_summary, config, gateway);

    if (!out.summary_json.empty()) {
        json j = {{"n", summary.n},
                  {"initial_correct", summary.initial_correct},
                  {"final_correct", summary.final_correct},
                  {"initial_accuracy", summary.initial_accuracy},
                  {"final_accuracy", summary.final_accuracy},
                  {"revised", summary.revised},
                  {"revised_pct", summary.revised_pct},
                  {"w2c", summary.w2c},
                  {"c2w", summary.c2w},
                  {"w2w_changed", summary.w2w_changed},
                  {"mode", to_string(summary.mode)},
                  {"reasoner_model", summary.reasoner_model},
                  {"validator_model", summary.validator_model}};
        std::ofstream summary_out(out.summary_json, std::ios::trunc);
        if (!summary_out) throw Error("cannot write summary: " + out.summary_json);
        summary_out << j.dump(2) << "\n";
    }
    return summary;
}

// --------------------------------------------------------------- comparison

PairedComparison compare_runs(const std::vector<ResultRow>& run_a,
                              const std::vector<ResultRow>& run_b) {
    std::map<std::string, bool> correct_a, correct_b;
    for (const auto& row : run_a) correct_a[row.sample_id] = row.final_correct;
    for (const auto& row : run_b) correct_b[row.sample_id] = row.final_correct;

    PairedComparison cmp;
    for (const auto& [id, a] : correct_a) {
        auto it = correct_b.find(id);
        if (it == correct_b.end()) continue;
        ++cmp.n;
        cmp.pairs.push_back({id, {a, it->second}});
        if (a && !it->second) ++cmp.b;
        if (!a && it->second) ++cmp.c;
    }
    if (cmp.n == 0) throw Error("runs share no sample ids");
    if (cmp.n != correct_a.size() || cmp.n != correct_b.size())
        cmp.warnings.push_back("sample id sets differ; paired on the intersection (N=" +
                               std::to_string(cmp.n) + ", runA=" + std::to_string(correct_a.size()) +
                               ", runB=" + std::to_string(correct_b.size()) + ")");
    return cmp;
}

}  // namespace qkg
