#pragma once
// Four-stage evaluation-set construction over pluggable grounding resources:
// concept grounding, KG alignment via hierarchy traversal, one-hop path
// filtering, and patient-characteristic annotation.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"
#include "qkg/pipeline.hpp"

namespace qkg {

struct ConceptCandidate {
    std::string concept_id;  // CUI-style string
    double score = 0.0;
};

// Abstract text -> concept lookup. The built-in implementation is a
// brute-force exact cosine index over provided vectors; a vector-database
// service would slot in behind the same interface.
class ConceptIndex {
public:
    virtual ~ConceptIndex() = default;
    virtual std::vector<ConceptCandidate> lookup(const std::string& text, size_t k) const = 0;
};

class CosineConceptIndex : public ConceptIndex {
public:
    using Embedder = std::function<std::optional<std::vector<double>>(const std::string&)>;

    CosineConceptIndex(std::vector<std::pair<std::string, std::vector<double>>> concept_vectors,
                       Embedder embedder);

    // Convenience: embedder backed by an exact text -> vector table.
    static CosineConceptIndex from_tables(
        std::vector<std::pair<std::string, std::vector<double>>> concept_vectors,
        std::map<std::string, std::vector<double>> text_vectors);

    std::vector<ConceptCandidate> lookup(const std::string& text, size_t k) const override;

private:
    std::vector<std::pair<std::string, std::vector<double>>> concepts_;
    Embedder embedder_;
};

// "concept_id<TAB>v1 v2 v3 ..." per line.
std::vector<std::pair<std::string, std::vector<double>>> load_concept_vectors(
    const std::string& path);

enum class AlignmentMethod { Direct, Hierarchy };

struct GroundedEntity {
    std::string surface;
    std::string concept_id;
    double score = 0.0;
    bool resolved = false;  // false when the index produced no candidate
    std::optional<std::int64_t> kg_index;
    std::optional<AlignmentMethod> method;
};

std::vector<GroundedEntity> ground_entities(const std::vector<std::string>& texts,
                                            const ConceptIndex& index);

// Stage-1 entity extraction: asks the role for {"entities": ["...", ...]}
// over the question text. Returns an empty list when the role is missing or
// the reply is unusable; callers fall back to pre-extracted texts.
std::vector<std::string> extract_entity_texts(const std::string& question_text, Gateway& gateway,
                                              const std::string& role);

// child concept id -> parent concept ids
using HierarchyMap = std::map<std::string, std::vector<std::string>>;

// Edge-list file: "child<TAB or comma>parent" per line.
HierarchyMap load_hierarchy(const std::string& path);

// Direct (source id) match first; otherwise breadth-first ancestor walk
// until a KG match or frontier exhaustion. A concept whose ancestor chain
// reaches itself raises an error naming the concept.
std::vector<GroundedEntity> align_to_kg(std::vector<GroundedEntity> grounded,
                                        const GraphStore& store, const HierarchyMap& hierarchy);

struct CandidateSample {
    QASample sample;
    std::vector<std::string> entity_texts;  // stage-1 input when pre-extracted
    std::vector<GroundedEntity> grounded;
    size_t path_count = 0;
};

struct PathEnumeration {
    size_t count = 0;
    std::vector<size_t> triplet_ids;
};

// Single edges joining two aligned nodes; fewer than two aligned nodes
// yield zero paths.
PathEnumeration enumerate_onehop_paths(const std::vector<std::int64_t>& aligned_indices,
                                       const GraphStore& subgraph);

// Drops zero-path candidates, sorts by path count descending with sample-id
// tie-break, keeps the first k.
std::vector<CandidateSample> rank_and_filter(std::vector<CandidateSample> candidates, size_t k);

}  // namespace qkg
