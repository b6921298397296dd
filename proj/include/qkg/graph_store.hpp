#pragma once
// GraphStore: immutable, indexed in-memory triplet store.
//
// Layout:
// - entities keyed by the source file's integer index (never reassigned,
//   so evidence strings citing "entity 30494" stay meaningful)
// - triplets stored with interned relation ids; triplet id = load order
// - adjacency: per-entity lists of incident triplet ids, split by role
//   (head side / tail side)
// - name index: normalized display name -> entity indices
//
// The store is built through add_entity/add_triplet, then frozen. After
// freeze() it is read-only and safe to share across threads without locks.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "qkg/error.hpp"

namespace qkg {

// The ten biomedical entity types accepted by importers. Source files may
// spell them with underscores or as "effect/phenotype"; canonicalize_entity_type
// folds those aliases in.
extern const std::vector<std::string> kEntityTypes;

// Returns the canonical spelling, or nullopt for unknown types.
std::optional<std::string> canonicalize_entity_type(const std::string& raw);

struct EntityRecord {
    std::int64_t index = 0;
    std::string source_id;     // e.g. "MONDO:5015", "DB06690"
    std::string source_vocab;  // e.g. "MONDO", "DrugBank"; may be empty
    std::string entity_type;   // canonical, one of kEntityTypes
    std::string name;

    bool operator==(const EntityRecord&) const = default;
};

struct TripletRecord {
    std::int64_t head = 0;
    std::string relation;
    std::int64_t tail = 0;

    bool operator==(const TripletRecord&) const = default;
};

class GraphStore {
public:
    GraphStore() = default;

    // -------- construction (importers only; throws once frozen) --------

    // Registers an entity. Re-adding an identical record is a no-op;
    // a conflicting record for the same index throws.
    void add_entity(EntityRecord e);

    // Returns false when the (head, relation, tail) tuple is already present.
    // Both endpoints must have been registered.
    bool add_triplet(std::int64_t head, const std::string& relation, std::int64_t tail);

    // Builds adjacency and name indices and seals the store.
    void freeze();
    bool frozen() const { return frozen_; }

    // -------- lookup --------

    size_t entity_count() const { return entity_order_.size(); }
    size_t triplet_count() const { return triplets_.size(); }

    bool has_entity(std::int64_t index) const;
    const EntityRecord& entity(std::int64_t index) const;  // throws on unknown index

    // Entity indices in ascending order.
    const std::vector<std::int64_t>& entity_indices() const { return entity_order_; }

    // nullptr when no entity carries the source id.
    const EntityRecord* find_by_source_id(const std::string& source_id) const;

    TripletRecord triplet(size_t triplet_id) const;  // id = load order
    std::vector<TripletRecord> triplets() const;

    const std::vector<std::string>& relation_vocabulary() const { return relations_; }

    // Incident triplet ids (head or tail side), each exactly once, ascending.
    std::vector<size_t> incident_ids(std::int64_t entity) const;

    // Every triplet touching the entity, ordered by triplet id.
    std::vector<TripletRecord> neighbors(std::int64_t entity) const;

    // Ranked lookup: exact normalized-name matches, then prefix matches,
    // then token-subset matches; ties broken by entity index.
    std::vector<EntityRecord> search_entities(const std::string& query, size_t limit) const;

    // Raw adjacency sizes, used by invariant checks.
    size_t head_occurrences(std::int64_t entity) const;
    size_t tail_occurrences(std::int64_t entity) const;

private:
    struct StoredTriplet {
        std::int64_t head;
        std::int64_t tail;
        std::uint32_t relation_id;
    };

    void require_mutable() const;
    void require_frozen() const;
    std::uint32_t intern_relation(const std::string& relation);

    bool frozen_ = false;
    std::unordered_map<std::int64_t, EntityRecord> entities_;
    std::vector<std::int64_t> entity_order_;  // ascending after freeze
    std::vector<StoredTriplet> triplets_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, std::uint32_t> relation_ids_;
    std::set<std::tuple<std::int64_t, std::uint32_t, std::int64_t>> dedup_;
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> adjacency_head_;
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> adjacency_tail_;
    std::unordered_map<std::string, std::vector<std::int64_t>> name_index_;
    std::vector<std::pair<std::string, std::int64_t>> names_sorted_;  // for prefix scans
    std::unordered_map<std::string, std::int64_t> source_id_index_;
};

enum class GraphFormat { Csv, Jsonl };

// Maps the logical import columns onto the file's header names.
// Defaults follow the PrimeKG export layout.
struct ColumnMap {
    std::string relation = "relation";
    std::string head_index = "x_index";
    std::string head_id = "x_id";
    std::string head_type = "x_type";
    std::string head_name = "x_name";
    std::string head_source = "x_source";  // optional column
    std::string tail_index = "y_index";
    std::string tail_id = "y_id";
    std::string tail_type = "y_type";
    std::string tail_name = "y_name";
    std::string tail_source = "y_source";  // optional column
};

struct LoadReport {
    size_t rows_read = 0;
    size_t triplets_loaded = 0;
    size_t duplicates_collapsed = 0;
    size_t entities_loaded = 0;
};

GraphStore load_graph(const std::string& path, GraphFormat format,
                      const ColumnMap& columns = {}, LoadReport* report = nullptr);

// JSONL export: one {"entity": ...} line per entity (ascending index), then one
// triplet line per triplet in id order. load_graph(Jsonl) round-trips exactly.
void save_graph_jsonl(const GraphStore& store, const std::string& path);

// Compact version-stamped binary cache.
void save_graph_cache(const GraphStore& store, const std::string& path);
GraphStore load_graph_cache(const std::string& path);

}  // namespace qkg
