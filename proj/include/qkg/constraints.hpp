#pragma once
// ConstraintItem storage: natural-language applicability conditions attached
// to context-sensitive relations (indication, contraindication, off-label
// use, drug_effect). Keys are (head source_id, relation, tail source_id) so
// annotations survive graph re-indexing.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"

namespace qkg {

// Five-point ordinal scale, most to least applicable. The extremes are
// fixed; the middle labels are the store defaults and may be overridden by
// a store header.
extern const std::vector<std::string> kApplicabilityLevels;

// Relation types whose validity varies with patient context.
extern const std::vector<std::string> kContextSensitiveRelations;

struct ConstraintItem {
    std::string patient_characteristics;  // e.g. "eGFR < 30"
    int applicability = 2;                // ordinal 0..4 into the level labels
    std::string evidence;

    bool operator==(const ConstraintItem&) const = default;
};

struct TripletKey {
    std::string head_id;
    std::string relation;
    std::string tail_id;

    auto operator<=>(const TripletKey&) const = default;
    std::string to_string() const { return head_id + "|" + relation + "|" + tail_id; }
};

struct AnnotatedRelation {
    TripletKey key;
    std::vector<ConstraintItem> constraints;
};

class ConstraintStore {
public:
    ConstraintStore() : levels_(kApplicabilityLevels) {}
    explicit ConstraintStore(std::vector<std::string> levels);

    const std::vector<std::string>& levels() const { return levels_; }
    int level_ordinal(const std::string& label) const;  // throws on unknown label
    const std::string& level_label(int ordinal) const;

    // One AnnotatedRelation per key; re-adding merges constraint lists.
    void add(AnnotatedRelation relation);

    // Empty when the triplet is unannotated.
    std::span<const ConstraintItem> get(const TripletKey& key) const;
    bool contains(const TripletKey& key) const;

    size_t relation_count() const { return relations_.size(); }
    size_t fact_count() const;       // total ConstraintItems
    size_t unique_entities() const;  // distinct head/tail source ids
    std::vector<std::string> relation_types() const;

    const std::map<TripletKey, AnnotatedRelation>& all() const { return relations_; }

private:
    std::vector<std::string> levels_;
    std::map<TripletKey, AnnotatedRelation> relations_;
};

// JSONL round-trip. The first line is a header object carrying the format
// version and the applicability level labels; loaders accept headerless
// files and fall back to the canonical labels. Load errors name the line
// and field.
void save_constraints(const ConstraintStore& store, const std::string& path);
ConstraintStore load_constraints(const std::string& path);

// ----------------------------------------------------------------- annotate

struct AnnotationFailure {
    TripletKey key;
    std::string reason;
};

struct AnnotationResult {
    ConstraintStore store;
    std::vector<AnnotationFailure> failures;  // never silently dropped
};

struct AnnotateOptions {
    std::string role = "annotator";
    std::vector<std::string> relation_filter = kContextSensitiveRelations;
    int schema_retries = 2;     // re-asks per triplet after invalid output
    int parallel = 4;           // bounded fan-out over triplets
    std::string prompt_template;  // must contain {head}, {relation}, {tail}
};

// Reads the annotator prompt from its versioned template file.
std::string load_prompt_template(const std::string& path);

// Asks the annotator role for ConstraintItems on every unique triplet whose
// relation passes the filter. Invalid outputs are retried, then recorded as
// failures; gateway exhaustion yields a partial store plus the manifest.
AnnotationResult annotate_relations(const GraphStore& subgraph, Gateway& gateway,
                                    const AnnotateOptions& options);

}  // namespace qkg
