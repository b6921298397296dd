#include "qkg/graph_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qkg/text.hpp"

namespace qkg {

using nlohmann::json;

const std::vector<std::string> kEntityTypes = {
    "gene/protein",      "drug",     "disease",
    "biological process", "phenotype", "pathway",
    "exposure",          "molecular function",
    "cellular component", "anatomy",
};

std::optional<std::string> canonicalize_entity_type(const std::string& raw) {
    std::string t = to_lower(trim(raw));
    for (auto& c : t)
        if (c == '_') c = ' ';
    if (t == "effect/phenotype") t = "phenotype";
    for (const auto& known : kEntityTypes)
        if (t == known) return known;
    return std::nullopt;
}

void GraphStore::require_mutable() const {
    if (frozen_) throw Error("graph store is frozen; no further mutation allowed");
}

void GraphStore::require_frozen() const {
    if (!frozen_) throw Error("graph store must be frozen before queries");
}

void GraphStore::add_entity(EntityRecord e) {
    require_mutable();
    auto canonical = canonicalize_entity_type(e.entity_type);
    if (!canonical)
        throw Error("unknown entity type '" + e.entity_type + "' for entity " +
                    std::to_string(e.index));
    e.entity_type = *canonical;

    auto it = entities_.find(e.index);
    if (it != entities_.end()) {
        if (it->second != e)
            throw Error("conflicting records for entity index " + std::to_string(e.index));
        return;
    }
    entity_order_.push_back(e.index);
    entities_.emplace(e.index, std::move(e));
}

std::uint32_t GraphStore::intern_relation(const std::string& relation) {
    auto it = relation_ids_.find(relation);
    if (it != relation_ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(relations_.size());
    relations_.push_back(relation);
    relation_ids_.emplace(relation, id);
    return id;
}

bool GraphStore::add_triplet(std::int64_t head, const std::string& relation, std::int64_t tail) {
    require_mutable();
    if (!entities_.count(head))
        throw Error("dangling endpoint reference: entity index " + std::to_string(head));
    if (!entities_.count(tail))
        throw Error("dangling endpoint reference: entity index " + std::to_string(tail));
    std::uint32_t rel = intern_relation(relation);
    if (!dedup_.emplace(head, rel, tail).second) return false;
    triplets_.push_back({head, tail, rel});
    return true;
}

void GraphStore::freeze() {
    require_mutable();
    std::sort(entity_order_.begin(), entity_order_.end());

    for (std::uint32_t id = 0; id < triplets_.size(); ++id) {
        adjacency_head_[triplets_[id].head].push_back(id);
        adjacency_tail_[triplets_[id].tail].push_back(id);
    }

    names_sorted_.reserve(entity_order_.size());
    for (std::int64_t idx : entity_order_) {
        const auto& rec = entities_.at(idx);
        std::string norm = normalize_name(rec.name);
        name_index_[norm].push_back(idx);
        names_sorted_.emplace_back(std::move(norm), idx);
        source_id_index_.emplace(rec.source_id, idx);
    }
    std::sort(names_sorted_.begin(), names_sorted_.end());

    frozen_ = true;
}

bool GraphStore::has_entity(std::int64_t index) const { return entities_.count(index) > 0; }

const EntityRecord& GraphStore::entity(std::int64_t index) const {
    auto it = entities_.find(index);
    if (it == entities_.end())
        throw Error("unknown entity index " + std::to_string(index));
    return it->second;
}

const EntityRecord* GraphStore::find_by_source_id(const std::string& source_id) const {
    require_frozen();
    auto it = source_id_index_.find(source_id);
    if (it == source_id_index_.end()) return nullptr;
    return &entities_.at(it->second);
}

TripletRecord GraphStore::triplet(size_t triplet_id) const {
    if (triplet_id >= triplets_.size())
        throw Error("triplet id out of range: " + std::to_string(triplet_id));
    const auto& t = triplets_[triplet_id];
    return {t.head, relations_[t.relation_id], t.tail};
}

std::vector<TripletRecord> GraphStore::triplets() const {
    std::vector<TripletRecord> out;
    out.reserve(triplets_.size());
    for (size_t i = 0; i < triplets_.size(); ++i) out.push_back(triplet(i));
    return out;
}

std::vector<size_t> GraphStore::incident_ids(std::int64_t entity) const {
    require_frozen();
    if (!entities_.count(entity))
        throw Error("unknown entity index " + std::to_string(entity));
    std::vector<size_t> ids;
    auto h = adjacency_head_.find(entity);
    auto t = adjacency_tail_.find(entity);
    if (h != adjacency_head_.end()) ids.assign(h->second.begin(), h->second.end());
    if (t != adjacency_tail_.end()) ids.insert(ids.end(), t->second.begin(), t->second.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());  // self-loops appear once
    return ids;
}

std::vector<TripletRecord> GraphStore::neighbors(std::int64_t entity) const {
    std::vector<TripletRecord> out;
    for (size_t id : incident_ids(entity)) out.push_back(triplet(id));
    return out;
}

size_t GraphStore::head_occurrences(std::int64_t entity) const {
    auto it = adjacency_head_.find(entity);
    return it == adjacency_head_.end() ? 0 : it->second.size();
}

size_t GraphStore::tail_occurrences(std::int64_t entity) const {
    auto it = adjacency_tail_.find(entity);
    return it == adjacency_tail_.end() ? 0 : it->second.size();
}

std::vector<EntityRecord> GraphStore::search_entities(const std::string& query, size_t limit) const {
    require_frozen();
    std::string norm = normalize_name(query);
    if (norm.empty()) throw Error("empty query after normalization");

    std::vector<std::int64_t> hits;
    std::set<std::int64_t> seen;
    auto take = [&](std::vector<std::int64_t> tier) {
        std::sort(tier.begin(), tier.end());
        for (std::int64_t idx : tier)
            if (seen.insert(idx).second) hits.push_back(idx);
    };

    // Tier 1: exact normalized-name match.
    if (auto it = name_index_.find(norm); it != name_index_.end()) take(it->second);

    // Tier 2: prefix match over the sorted name table.
    {
        std::vector<std::int64_t> tier;
        auto lo = std::lower_bound(names_sorted_.begin(), names_sorted_.end(),
                                   std::make_pair(norm, std::numeric_limits<std::int64_t>::min()));
        for (auto it = lo; it != names_sorted_.end() && it->first.compare(0, norm.size(), norm) == 0; ++it)
            tier.push_back(it->second);
        take(std::move(tier));
    }

    // Tier 3: every query token appears among the name's tokens.
    if (hits.size() < limit) {
        auto query_tokens = tokenize(norm);
        std::vector<std::int64_t> tier;
        for (const auto& [name, idx] : names_sorted_) {
            auto name_tokens = tokenize(name);
            bool all = true;
            for (const auto& qt : query_tokens) {
                if (std::find(name_tokens.begin(), name_tokens.end(), qt) == name_tokens.end()) {
                    all = false;
                    break;
                }
            }
            if (all) tier.push_back(idx);
        }
        take(std::move(tier));
    }

    std::vector<EntityRecord> out;
    for (std::int64_t idx : hits) {
        if (out.size() >= limit) break;
        out.push_back(entities_.at(idx));
    }
    return out;
}

// ---------------------------------------------------------------- CSV import

namespace {

// RFC-4180-ish line splitter; handles quoted fields with embedded commas.
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\r') {
            // ignore
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::int64_t parse_index(const std::string& s, size_t row) {
    try {
        size_t pos = 0;
        std::int64_t v = std::stoll(trim(s), &pos);
        if (pos != trim(s).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw Error("row " + std::to_string(row) + ": malformed entity index '" + s + "'");
    }
}

GraphStore load_graph_csv(const std::string& path, const ColumnMap& columns, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file: " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) throw Error("empty graph file: " + path);
    auto header = split_csv_row(header_line);

    std::unordered_map<std::string, size_t> col;
    for (size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;

    auto require_col = [&](const std::string& name) -> size_t {
        auto it = col.find(name);
        if (it == col.end()) throw Error("missing required column '" + name + "' in " + path);
        return it->second;
    };
    auto optional_col = [&](const std::string& name) -> std::optional<size_t> {
        auto it = col.find(name);
        if (it == col.end()) return std::nullopt;
        return it->second;
    };

    size_t c_rel = require_col(columns.relation);
    size_t c_hi = require_col(columns.head_index), c_hid = require_col(columns.head_id);
    size_t c_ht = require_col(columns.head_type), c_hn = require_col(columns.head_name);
    size_t c_ti = require_col(columns.tail_index), c_tid = require_col(columns.tail_id);
    size_t c_tt = require_col(columns.tail_type), c_tn = require_col(columns.tail_name);
    auto c_hs = optional_col(columns.head_source);
    auto c_ts = optional_col(columns.tail_source);

    GraphStore store;
    LoadReport rep;
    std::string line;
    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto fields = split_csv_row(line);
        if (fields.size() < header.size())
            throw Error("row " + std::to_string(row) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
        ++rep.rows_read;

        auto field = [&](size_t i) { return fields[i]; };
        EntityRecord head{parse_index(field(c_hi), row), field(c_hid),
                          c_hs ? field(*c_hs) : "", field(c_ht), field(c_hn)};
        EntityRecord tail{parse_index(field(c_ti), row), field(c_tid),
                          c_ts ? field(*c_ts) : "", field(c_tt), field(c_tn)};
        try {
            store.add_entity(std::move(head));
            store.add_entity(std::move(tail));
            if (store.add_triplet(parse_index(field(c_hi), row), trim(field(c_rel)),
                                  parse_index(field(c_ti), row)))
                ++rep.triplets_loaded;
            else
                ++rep.duplicates_collapsed;
        } catch (const Error& e) {
            throw Error("row " + std::to_string(row) + ": " + e.what());
        }
    }
    store.freeze();
    rep.entities_loaded = store.entity_count();
    if (report) *report = rep;
    return store;
}

EntityRecord entity_from_json(const json& j) {
    for (const char* key : {"index", "id", "type", "name"})
        if (!j.contains(key)) throw Error(std::string("entity object missing field '") + key + "'");
    return EntityRecord{j.at("index").get<std::int64_t>(), j.at("id").get<std::string>(),
                        j.value("source", ""), j.at("type").get<std::string>(),
                        j.at("name").get<std::string>()};
}

GraphStore load_graph_jsonl(const std::string& path, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file: " + path);

    GraphStore store;
    LoadReport rep;
    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("row " + std::to_string(row) + ": malformed JSON");
        try {
            if (j.contains("entity")) {
                store.add_entity(entity_from_json(j.at("entity")));
                continue;
            }
            if (!j.contains("relation") || !j.contains("head") || !j.contains("tail"))
                throw Error("triplet object missing relation/head/tail");
            ++rep.rows_read;
            auto endpoint = [&](const json& side) -> std::int64_t {
                if (side.is_number_integer()) {
                    // Bare index: the entity must already be declared.
                    return side.get<std::int64_t>();
                }
                EntityRecord rec = entity_from_json(side);
                std::int64_t idx = rec.index;
                store.add_entity(std::move(rec));
                return idx;
            };
            std::int64_t h = endpoint(j.at("head"));
            std::int64_t t = endpoint(j.at("tail"));
            if (store.add_triplet(h, j.at("relation").get<std::string>(), t))
                ++rep.triplets_loaded;
            else
                ++rep.duplicates_collapsed;
        } catch (const Error& e) {
            throw Error("row " + std::to_string(row) + ": " + e.what());
        }
    }
    store.freeze();
    rep.entities_loaded = store.entity_count();
    if (report) *report = rep;
    return store;
}

}  // namespace

GraphStore load_graph(const std::string& path, GraphFormat format, const ColumnMap& columns,
                      LoadReport* report) {
    switch (format) {
        case GraphFormat::Csv:
            return load_graph_csv(path, columns, report);
        case GraphFormat::Jsonl:
            return load_graph_jsonl(path, report);
    }
    throw Error("unreachable graph format");
}

void save_graph_jsonl(const GraphStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write graph file: " + path);
    for (std::int64_t idx : store.entity_indices()) {
        const auto& e = store.entity(idx);
        json j = {{"entity",
                   {{"index", e.index},
                    {"id", e.source_id},
                    {"source", e.source_vocab},
                    {"type", e.entity_type},
                    {"name", e.name}}}};
        out << j.dump() << "\n";
    }
    for (size_t id = 0; id < store.triplet_count(); ++id) {
        TripletRecord t = store.triplet(id);
        json j = {{"relation", t.relation}, {"head", t.head}, {"tail", t.tail}};
        out << j.dump() << "\n";
    }
}

// ------------------------------------------------------------- binary cache

namespace {

constexpr std::uint32_t kCacheMagic = 0x514B4731;  // "QKG1"
constexpr std::uint32_t kCacheVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw Error("truncated graph cache");
    return v;
}
std::int64_t read_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw Error("truncated graph cache");
    return v;
}
std::string read_str(std::istream& in) {
    std::uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw Error("truncated graph cache");
    return s;
}

}  // namespace

void save_graph_cache(const GraphStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write graph cache: " + path);
    write_u32(out, kCacheMagic);
    write_u32(out, kCacheVersion);
    write_u32(out, static_cast<std::uint32_t>(store.entity_count()));
    write_u32(out, static_cast<std::uint32_t>(store.triplet_count()));
    for (std::int64_t idx : store.entity_indices()) {
        const auto& e = store.entity(idx);
        write_i64(out, e.index);
        write_str(out, e.source_id);
        write_str(out, e.source_vocab);
        write_str(out, e.entity_type);
        write_str(out, e.name);
    }
    for (size_t id = 0; id < store.triplet_count(); ++id) {
        TripletRecord t = store.triplet(id);
        write_i64(out, t.head);
        write_str(out, t.relation);
        write_i64(out, t.tail);
    }
}

GraphStore load_graph_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open graph cache: " + path);
    if (read_u32(in) != kCacheMagic) throw Error("not a graph cache file: " + path);
    std::uint32_t version = read_u32(in);
    if (version != kCacheVersion)
        throw Error("unsupported graph cache version " + std::to_string(version));
    std::uint32_t n_entities = read_u32(in);
    std::uint32_t n_triplets = read_u32(in);
    GraphStore store;
    for (std::uint32_t i = 0; i < n_entities; ++i) {
        EntityRecord e;
        e.index = read_i64(in);
        e.source_id = read_str(in);
        e.source_vocab = read_str(in);
        e.entity_type = read_str(in);
        e.name = read_str(in);
        store.add_entity(std::move(e));
    }
    for (std::uint32_t i = 0; i < n_triplets; ++i) {
        std::int64_t h = read_i64(in);
        std::string rel = read_str(in);
        std::int64_t t = read_i64(in);
        store.add_triplet(h, rel, t);
    }
    store.freeze();
    return store;
}

}  // namespace qkg
