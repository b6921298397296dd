#include "qkg/subgraph.hpp"

#include <algorithm>
#include <set>

namespace qkg {

std::pair<std::vector<size_t>, std::vector<std::int64_t>> extract_direct_layer(
    const GraphStore& store, std::int64_t target) {
    std::vector<size_t> ids = store.incident_ids(target);  // throws on unknown target
    std::set<std::int64_t> e1;
    for (size_t id : ids) {
        TripletRecord t = store.triplet(id);
        if (t.head != target) e1.insert(t.head);
        if (t.tail != target) e1.insert(t.tail);
    }
    return {std::move(ids), std::vector<std::int64_t>(e1.begin(), e1.end())};
}

std::vector<size_t> extract_indirect_layer(const GraphStore& store,
                                           const std::vector<std::int64_t>& intermediates) {
    std::set<size_t> ids;
    for (std::int64_t e : intermediates)
        for (size_t id : store.incident_ids(e)) ids.insert(id);
    return {ids.begin(), ids.end()};
}

Subgraph build_subgraph(const GraphStore& store, std::int64_t target) {
    Subgraph sub;
    sub.target = target;
    auto [direct, e1] = extract_direct_layer(store, target);
    sub.direct_ids = std::move(direct);
    sub.intermediates = std::move(e1);
    sub.indirect_ids = extract_indirect_layer(store, sub.intermediates);

    std::set<size_t> merged(sub.direct_ids.begin(), sub.direct_ids.end());
    merged.insert(sub.indirect_ids.begin(), sub.indirect_ids.end());
    sub.merged_ids.assign(merged.begin(), merged.end());

    std::set<std::int64_t> entity_set{target};
    for (size_t id : sub.merged_ids) {
        TripletRecord t = store.triplet(id);
        entity_set.insert(t.head);
        entity_set.insert(t.tail);
    }
    for (std::int64_t idx : entity_set) sub.merged.add_entity(store.entity(idx));
    for (size_t id : sub.merged_ids) {
        TripletRecord t = store.triplet(id);
        sub.merged.add_triplet(t.head, t.relation, t.tail);
    }
    sub.merged.freeze();
    return sub;
}

SubgraphStats subgraph_stats(const Subgraph& sub) {
    SubgraphStats stats;
    stats.target_index = sub.target;
    stats.target_source_id = sub.merged.entity(sub.target).source_id;
    stats.direct_triplets = sub.direct_ids.size();
    stats.intermediate_entities = sub.intermediates.size();
    stats.indirect_triplets = sub.indirect_ids.size();
    stats.merged_triplets = sub.merged_ids.size();
    stats.merged_entities_with_target = sub.merged.entity_count();
    bool target_isolated_or_present = sub.merged.has_entity(sub.target);
    stats.merged_entities_without_target =
        stats.merged_entities_with_target - (target_isolated_or_present ? 1 : 0);
    for (std::int64_t idx : sub.merged.entity_indices())
        ++stats.entity_type_histogram[sub.merged.entity(idx).entity_type];
    for (size_t id = 0; id < sub.merged.triplet_count(); ++id)
        ++stats.relation_type_histogram[sub.merged.triplet(id).relation];
    return stats;
}

}  // namespace qkg
