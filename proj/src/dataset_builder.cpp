#include "qkg/dataset_builder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qkg/text.hpp"

namespace qkg {

// ----------------------------------------------------------- concept index

CosineConceptIndex::CosineConceptIndex(
    std::vector<std::pair<std::string, std::vector<double>>> concept_vectors, Embedder embedder)
    : concepts_(std::move(concept_vectors)), embedder_(std::move(embedder)) {
    if (!embedder_) throw Error("cosine index requires an embedder");
}

CosineConceptIndex CosineConceptIndex::from_tables(
    std::vector<std::pair<std::string, std::vector<double>>> concept_vectors,
    std::map<std::string, std::vector<double>> text_vectors) {
    auto table = std::make_shared<std::map<std::string, std::vector<double>>>(std::move(text_vectors));
    return CosineConceptIndex(std::move(concept_vectors),
                              [table](const std::string& text) -> std::optional<std::vector<double>> {
                                  auto it = table->find(text);
                                  if (it == table->end()) return std::nullopt;
                                  return it->second;
                              });
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<ConceptCandidate> CosineConceptIndex::lookup(const std::string& text, size_t k) const {
    auto query = embedder_(text);
    if (!query) return {};
    std::vector<ConceptCandidate> scored;
    scored.reserve(concepts_.size());
    for (const auto& [id, vec] : concepts_) scored.push_back({id, cosine(*query, vec)});
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.concept_id < b.concept_id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<std::pair<std::string, std::vector<double>>> load_concept_vectors(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open concept vector file: " + path);
    std::vector<std::pair<std::string, std::vector<double>>> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("concept vector line " + std::to_string(line_no) + ": expected id<TAB>values");
        std::string id = line.substr(0, tab);
        std::vector<double> vec;
        std::istringstream values(line.substr(tab + 1));
        double v;
        while (values >> v) vec.push_back(v);
        if (vec.empty())
            throw Error("concept vector line " + std::to_string(line_no) + ": empty vector");
        out.emplace_back(std::move(id), std::move(vec));
    }
    return out;
}

// -------------------------------------------------------------- stage 1 & 2

std::vector<std::string> extract_entity_texts(const std::string& question_text, Gateway& gateway,
                                              const std::string& role) {
    if (role.empty() || !gateway.has_role(role)) return {};
    std::vector<Message> messages = {
        {"system",
         "Extract the named medical entities (diseases, drugs, phenotypes, procedures, lab "
         "analytes) mentioned in the question and its answer options. Reply with one JSON "
         "object: {\"entities\": [\"...\", ...]}."},
        {"user", question_text}};
    try {
        nlohmann::json j =
            nlohmann::json::parse(extract_first_json_object(gateway.complete(role, messages)));
        std::vector<std::string> out;
        for (const auto& e : j.value("entities", nlohmann::json::array()))
            if (e.is_string() && !e.get<std::string>().empty()) out.push_back(e.get<std::string>());
        return out;
    } catch (const Error&) {
        return {};
    }
}

std::vector<GroundedEntity> ground_entities(const std::vector<std::string>& texts,
                                            const ConceptIndex& index) {
    std::vector<GroundedEntity> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        GroundedEntity entity;
        entity.surface = text;
        auto candidates = index.lookup(text, 1);
        if (!candidates.empty()) {
            entity.concept_id = candidates[0].concept_id;
            entity.score = candidates[0].score;
            entity.resolved = true;
        }
        out.push_back(std::move(entity));
    }
    return out;
}

HierarchyMap load_hierarchy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open hierarchy file: " + path);
    HierarchyMap map;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto sep = t.find('\t');
        if (sep == std::string::npos) sep = t.find(',');
        if (sep == std::string::npos)
            throw Error("hierarchy line " + std::to_string(line_no) + ": expected child<TAB>parent");
        map[trim(t.substr(0, sep))].push_back(trim(t.substr(sep + 1)));
    }
    return map;
}

std::vector<GroundedEntity> align_to_kg(std::vector<GroundedEntity> grounded,
                                        const GraphStore& store, const HierarchyMap& hierarchy) {
    for (auto& entity : grounded) {
        if (!entity.resolved) continue;

        // Strategy 1: direct source-id match.
        if (const EntityRecord* direct = store.find_by_source_id(entity.concept_id)) {
            entity.kg_index = direct->index;
            entity.method = AlignmentMethod::Direct;
            continue;
        }

        // Strategy 2: breadth-first walk over ancestor concepts.
        std::deque<std::string> frontier{entity.concept_id};
        std::set<std::string> visited{entity.concept_id};
        bool matched = false;
        while (!frontier.empty() && !matched) {
            std::string current = frontier.front();
            frontier.pop_front();
            auto parents = hierarchy.find(current);
            if (parents == hierarchy.end()) continue;
            for (const auto& parent : parents->second) {
                if (parent == entity.concept_id)
                    throw Error("hierarchy cycle involving concept " + entity.concept_id);
                if (!visited.insert(parent).second) continue;
                if (const EntityRecord* hit = store.find_by_source_id(parent)) {
                    entity.kg_index = hit->index;
                    entity.method = AlignmentMethod::Hierarchy;
                    matched = true;
                    break;
                }
                frontier.push_back(parent);
            }
        }
        // Unmatched entities stay flagged: resolved concept, no alignment.
    }
    return grounded;
}

// ------------------------------------------------------------------ stage 3

PathEnumeration enumerate_onehop_paths(const std::vector<std::int64_t>& aligned_indices,
                                       const GraphStore& subgraph) {
    PathEnumeration result;
    std::set<std::int64_t> aligned(aligned_indices.begin(), aligned_indices.end());
    if (aligned.size() < 2) return result;
    std::set<size_t> ids;
    for (std::int64_t entity : aligned) {
        if (!subgraph.has_entity(entity)) continue;
        for (size_t id : subgraph.incident_ids(entity)) {
            TripletRecord t = subgraph.triplet(id);
            if (aligned.count(t.head) && aligned.count(t.tail)) ids.insert(id);
        }
    }
    result.triplet_ids.assign(ids.begin(), ids.end());
    result.count = result.triplet_ids.size();
    return result;
}

std::vector<CandidateSample> rank_and_filter(std::vector<CandidateSample> candidates, size_t k) {
    if (k < 1) throw Error("rank_and_filter requires k >= 1");
    candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                    [](const CandidateSample& c) { return c.path_count == 0; }),
                     candidates.end());
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const CandidateSample& a, const CandidateSample& b) {
                         if (a.path_count != b.path_count) return a.path_count > b.path_count;
                         return a.sample.id < b.sample.id;
                     });
    if (candidates.size() > k) candidates.resize(k);
    return candidates;
}

}  // namespace qkg
