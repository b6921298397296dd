#pragma once
// Two-layer disease-centric subgraph extraction.
//
// The direct layer is every triplet incident to the target entity; its other
// endpoints form the intermediate set E1. The indirect layer is every triplet
// with at least one endpoint in E1, computed over the full store. The merged
// subgraph is the deduplicated union of both layers, materialized as a
// restricted GraphStore that keeps the source entity indices.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qkg/graph_store.hpp"

namespace qkg {

struct Subgraph {
    std::int64_t target = 0;
    std::vector<size_t> direct_ids;            // triplet ids in the source store
    std::vector<std::int64_t> intermediates;   // E1, ascending
    std::vector<size_t> indirect_ids;
    std::vector<size_t> merged_ids;            // dedup(direct ∪ indirect), ascending
    GraphStore merged;
};

struct SubgraphStats {
    std::string target_source_id;
    std::int64_t target_index = 0;
    size_t direct_triplets = 0;
    size_t intermediate_entities = 0;
    size_t indirect_triplets = 0;
    size_t merged_triplets = 0;
    size_t merged_entities_with_target = 0;
    size_t merged_entities_without_target = 0;
    std::map<std::string, size_t> entity_type_histogram;
    std::map<std::string, size_t> relation_type_histogram;
};

// Direct layer: (incident triplet ids, E1). Self-loops on the target
// contribute no intermediates.
std::pair<std::vector<size_t>, std::vector<std::int64_t>> extract_direct_layer(
    const GraphStore& store, std::int64_t target);

// Indirect layer: ids of all triplets with head or tail in E1, each once.
std::vector<size_t> extract_indirect_layer(const GraphStore& store,
                                           const std::vector<std::int64_t>& intermediates);

Subgraph build_subgraph(const GraphStore& store, std::int64_t target);

SubgraphStats subgraph_stats(const Subgraph& sub);

}  // namespace qkg
