#include "qkg/constraints.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "qkg/text.hpp"

namespace qkg {

using nlohmann::json;

const std::vector<std::string> kApplicabilityLevels = {
    "Definitely Applicable", "Probably Applicable", "Uncertain",
    "Probably NOT Applicable", "Definitely NOT Applicable",
};

const std::vector<std::string> kContextSensitiveRelations = {
    "indication", "contraindication", "off-label use", "drug_effect",
};

ConstraintStore::ConstraintStore(std::vector<std::string> levels) : levels_(std::move(levels)) {
    if (levels_.size() != 5)
        throw Error("applicability scale must have exactly five levels, got " +
                    std::to_string(levels_.size()));
}

int ConstraintStore::level_ordinal(const std::string& label) const {
    for (size_t i = 0; i < levels_.size(); ++i)
        if (levels_[i] == label) return static_cast<int>(i);
    throw Error("unknown applicability label: '" + label + "'");
}

const std::string& ConstraintStore::level_label(int ordinal) const {
    if (ordinal < 0 || ordinal >= static_cast<int>(levels_.size()))
        throw Error("applicability ordinal out of range: " + std::to_string(ordinal));
    return levels_[static_cast<size_t>(ordinal)];
}

void ConstraintStore::add(AnnotatedRelation relation) {
    auto [it, inserted] = relations_.try_emplace(relation.key, std::move(relation));
    if (!inserted) {
        auto& existing = it->second.constraints;
        for (auto& item : relation.constraints) existing.push_back(std::move(item));
    }
}

std::span<const ConstraintItem> ConstraintStore::get(const TripletKey& key) const {
    auto it = relations_.find(key);
    if (it == relations_.end()) return {};
    return it->second.constraints;
}

bool ConstraintStore::contains(const TripletKey& key) const { return relations_.count(key) > 0; }

size_t ConstraintStore::fact_count() const {
    size_t total = 0;
    for (const auto& [key, relation] : relations_) total += relation.constraints.size();
    return total;
}

size_t ConstraintStore::unique_entities() const {
    std::set<std::string> ids;
    for (const auto& [key, relation] : relations_) {
        ids.insert(key.head_id);
        ids.insert(key.tail_id);
    }
    return ids.size();
}

std::vector<std::string> ConstraintStore::relation_types() const {
    std::set<std::string> types;
    for (const auto& [key, relation] : relations_) types.insert(key.relation);
    return {types.begin(), types.end()};
}

// -------------------------------------------------------------------- JSONL

void save_constraints(const ConstraintStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write constraint store: " + path);
    json header = {{"format", "qkg-constraints"},
                   {"version", 1},
                   {"applicability_levels", store.levels()}};
    out << header.dump() << "\n";
    for (const auto& [key, relation] : store.all()) {
        json constraints = json::array();
        for (const auto& item : relation.constraints)
            constraints.push_back({{"patient_characteristics", item.patient_characteristics},
                                   {"applicability", store.level_label(item.applicability)},
                                   {"evidence", item.evidence}});
        json j = {{"triplet_key",
                   {{"head_id", key.head_id}, {"relation", key.relation}, {"tail_id", key.tail_id}}},
                  {"constraints", constraints}};
        out << j.dump() << "\n";
    }
}

namespace {

Error line_error(size_t line, const std::string& what) {
    return Error("line " + std::to_string(line) + ": " + what);
}

TripletKey key_from_json(const json& j, size_t line) {
    // Canonical shape plus the flat spellings used by external exports.
    if (j.contains("triplet_key")) {
        const json& k = j.at("triplet_key");
        for (const char* field : {"head_id", "relation", "tail_id"})
            if (!k.contains(field)) throw line_error(line, std::string("triplet_key missing field '") + field + "'");
        return {k.at("head_id").get<std::string>(), k.at("relation").get<std::string>(),
                k.at("tail_id").get<std::string>()};
    }
    if (j.contains("head_id") && j.contains("relation") && j.contains("tail_id"))
        return {j.at("head_id").get<std::string>(), j.at("relation").get<std::string>(),
                j.at("tail_id").get<std::string>()};
    if (j.contains("x_id") && j.contains("relation") && j.contains("y_id"))
        return {j.at("x_id").get<std::string>(), j.at("relation").get<std::string>(),
                j.at("y_id").get<std::string>()};
    throw line_error(line, "missing field 'triplet_key'");
}

}  // namespace

ConstraintStore load_constraints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open constraint store: " + path);

    std::string line;
    size_t line_no = 0;
    std::optional<ConstraintStore> store;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw line_error(line_no, "malformed JSON");

        if (!store) {
            if (j.contains("format")) {
                if (j.value("format", "") != "qkg-constraints")
                    throw line_error(line_no, "unrecognized format '" + j.value("format", "") + "'");
                std::vector<std::string> levels = kApplicabilityLevels;
                if (j.contains("applicability_levels"))
                    levels = j.at("applicability_levels").get<std::vector<std::string>>();
                store.emplace(std::move(levels));
                continue;
            }
            store.emplace();  // headerless file, canonical labels
        }

        AnnotatedRelation relation;
        relation.key = key_from_json(j, line_no);
        if (!j.contains("constraints") || !j.at("constraints").is_array())
            throw line_error(line_no, "missing field 'constraints'");
        for (const auto& c : j.at("constraints")) {
            ConstraintItem item;
            if (!c.contains("patient_characteristics"))
                throw line_error(line_no, "missing field 'patient_characteristics'");
            item.patient_characteristics = c.at("patient_characteristics").get<std::string>();
            if (item.patient_characteristics.empty())
                throw line_error(line_no, "field 'patient_characteristics' must be non-empty");
            if (!c.contains("applicability"))
                throw line_error(line_no, "missing field 'applicability'");
            if (c.at("applicability").is_number_integer()) {
                int ordinal = c.at("applicability").get<int>();
                if (ordinal < 0 || ordinal > 4)
                    throw line_error(line_no, "field 'applicability' out of range");
                item.applicability = ordinal;
            } else {
                try {
                    item.applicability = store->level_ordinal(c.at("applicability").get<std::string>());
                } catch (const Error& e) {
                    throw line_error(line_no, std::string("field 'applicability': ") + e.what());
                }
            }
            item.evidence = c.value("evidence", "");
            relation.constraints.push_back(std::move(item));
        }
        store->add(std::move(relation));
    }
    if (!store) store.emplace();
    return std::move(*store);
}

// ----------------------------------------------------------------- annotate

std::string load_prompt_template(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open prompt template: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

namespace {

std::string render_template(std::string text, const TripletKey& key, const GraphStore& graph) {
    auto replace_all = [&](const std::string& needle, const std::string& value) {
        size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            text.replace(pos, needle.size(), value);
            pos += value.size();
        }
    };
    const EntityRecord* head = graph.find_by_source_id(key.head_id);
    const EntityRecord* tail = graph.find_by_source_id(key.tail_id);
    replace_all("{head}", head ? head->name : key.head_id);
    replace_all("{relation}", key.relation);
    replace_all("{tail}", tail ? tail->name : key.tail_id);
    replace_all("{head_id}", key.head_id);
    replace_all("{tail_id}", key.tail_id);
    return text;
}

std::vector<ConstraintItem> parse_constraint_items(const std::string& raw,
                                                   const ConstraintStore& store) {
    // Accepts either a bare array or {"constraints": [...]}.
    std::string payload;
    size_t array_start = raw.find('[');
    size_t object_start = raw.find('{');
    if (array_start != std::string::npos &&
        (object_start == std::string::npos || array_start < object_start)) {
        payload = raw.substr(array_start);
    } else {
        payload = extract_first_json_object(raw);
    }
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded()) throw ParseError("annotator output is not valid JSON");
    json items = j.is_array() ? j : j.value("constraints", json::array());
    if (!items.is_array() || items.empty())
        throw ValidationError("annotator output contains no constraint items");
    std::vector<ConstraintItem> out;
    for (const auto& c : items) {
        ConstraintItem item;
        if (!c.contains("patient_characteristics") || !c.at("patient_characteristics").is_string())
            throw ValidationError("constraint item missing 'patient_characteristics'");
        item.patient_characteristics = c.at("patient_characteristics").get<std::string>();
        if (item.patient_characteristics.empty())
            throw ValidationError("'patient_characteristics' must be non-empty");
        if (!c.contains("applicability"))
            throw ValidationError("constraint item missing 'applicability'");
        if (c.at("applicability").is_number_integer())
            item.applicability = c.at("applicability").get<int>();
        else
            item.applicability = store.level_ordinal(c.at("applicability").get<std::string>());
        if (item.applicability < 0 || item.applicability > 4)
            throw ValidationError("'applicability' out of range");
        item.evidence = c.value("evidence", "");
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace

AnnotationResult annotate_relations(const GraphStore& subgraph, Gateway& gateway,
                                    const AnnotateOptions& options) {
    if (options.prompt_template.empty())
        throw Error("annotate_relations requires a prompt template");

    std::set<std::string> filter(options.relation_filter.begin(), options.relation_filter.end());
    std::vector<TripletKey> keys;
    std::set<TripletKey> seen;
    for (size_t id = 0; id < subgraph.triplet_count(); ++id) {
        TripletRecord t = subgraph.triplet(id);
        if (!filter.count(t.relation)) continue;
        TripletKey key{subgraph.entity(t.head).source_id, t.relation,
                       subgraph.entity(t.tail).source_id};
        if (seen.insert(key).second) keys.push_back(std::move(key));
    }

    AnnotationResult result;
    std::mutex result_mutex;
    std::atomic<size_t> next{0};

    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= keys.size()) return;
            const TripletKey& key = keys[i];
            std::string prompt = render_template(options.prompt_template, key, subgraph);
            std::string failure;
            for (int attempt = 0; attempt <= options.schema_retries; ++attempt) {
                try {
                    std::vector<Message> messages = {{"user", prompt}};
                    if (attempt > 0)
                        messages.push_back(
                            {"user",
                             "The previous output failed validation (" + failure +
                                 "). Reply again with a JSON array of constraint objects "
                                 "{patient_characteristics, applicability, evidence}."});
                    std::string raw = gateway.complete(options.role, messages);
                    std::lock_guard lock(result_mutex);
                    auto items = parse_constraint_items(raw, result.store);
                    result.store.add({key, std::move(items)});
                    failure.clear();
                    break;
                } catch (const Error& e) {
                    failure = e.what();
                }
            }
            if (!failure.empty()) {
                std::lock_guard lock(result_mutex);
                result.failures.push_back({key, failure});
            }
        }
    };

    int parallel = std::max(1, options.parallel);
    std::vector<std::thread> threads;
    for (int i = 0; i < parallel; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    // Deterministic manifest order regardless of worker interleaving.
    std::sort(result.failures.begin(), result.failures.end(),
              [](const AnnotationFailure& a, const AnnotationFailure& b) { return a.key < b.key; });
    return result;
}

}  // namespace qkg
