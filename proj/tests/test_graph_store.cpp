#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "qkg/graph_store.hpp"

using namespace qkg;

namespace {

// Six-node fixture exercising both endpoint roles, a duplicate-free mix of
// relations, and one isolated entity.
GraphStore fixture_store() {
    GraphStore store;
    store.add_entity({1, "MONDO:5015", "MONDO", "disease", "diabetes mellitus"});
    store.add_entity({2, "DB06690", "DrugBank", "drug", "Nitrous oxide"});
    store.add_entity({3, "DB01060", "DrugBank", "drug", "Amoxicillin"});
    store.add_entity({4, "HP:0003074", "HPO", "phenotype", "Hyperglycemia"});
    store.add_entity({5, "GO:0006006", "GO", "biological process", "glucose metabolic process"});
    store.add_entity({6, "UBERON:0001264", "UBERON", "anatomy", "pancreas"});  // isolated
    store.add_triplet(2, "contraindication", 1);
    store.add_triplet(3, "indication", 1);
    store.add_triplet(1, "phenotype present", 4);
    store.add_triplet(4, "associated with", 5);
    store.freeze();
    return store;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

GraphStore random_store(std::mt19937& rng, int n_entities, int n_triplets) {
    GraphStore store;
    for (int i = 0; i < n_entities; ++i)
        store.add_entity({i, "ID:" + std::to_string(i), "SRC",
                          kEntityTypes[static_cast<size_t>(i) % kEntityTypes.size()],
                          "entity " + std::to_string(i)});
    std::uniform_int_distribution<int> pick(0, n_entities - 1);
    std::uniform_int_distribution<int> rel(0, 2);
    const char* relations[] = {"indication", "contraindication", "associated with"};
    for (int i = 0; i < n_triplets; ++i)
        store.add_triplet(pick(rng), relations[rel(rng)], pick(rng));
    store.freeze();
    return store;
}

}  // namespace

TEST_SUITE("graph_store") {

TEST_CASE("duplicate rows collapse to one triplet") {
    std::string path = temp_path("qkg_dup.csv");
    {
        std::ofstream out(path);
        out << "relation,x_index,x_id,x_type,x_name,y_index,y_id,y_type,y_name\n";
        out << "indication,1,DB1,drug,aspirin,2,MONDO:1,disease,headache\n";
        out << "indication,1,DB1,drug,aspirin,2,MONDO:1,disease,headache\n";
        out << "contraindication,1,DB1,drug,aspirin,3,MONDO:2,disease,ulcer\n";
    }
    LoadReport report;
    GraphStore store = load_graph(path, GraphFormat::Csv, {}, &report);
    CHECK(store.triplet_count() == 2);
    CHECK(report.rows_read == 3);
    CHECK(report.duplicates_collapsed == 1);
    std::remove(path.c_str());
}

TEST_CASE("malformed row reports its row number") {
    std::string path = temp_path("qkg_bad.csv");
    {
        std::ofstream out(path);
        out << "relation,x_index,x_id,x_type,x_name,y_index,y_id,y_type,y_name\n";
        out << "indication,1,DB1,drug,aspirin,2,MONDO:1,disease,headache\n";
        out << "indication,notanumber,DB1,drug,aspirin,2,MONDO:1,disease,headache\n";
    }
    CHECK_THROWS_WITH_AS(load_graph(path, GraphFormat::Csv), doctest::Contains("row 3"), Error);
    std::remove(path.c_str());
}

TEST_CASE("unknown entity type is rejected, aliases are folded") {
    GraphStore store;
    CHECK_THROWS_AS(store.add_entity({1, "X", "", "spaceship", "x"}), Error);
    store.add_entity({2, "Y", "", "effect/phenotype", "y"});
    store.add_entity({3, "Z", "", "biological_process", "z"});
    CHECK(store.entity(2).entity_type == "phenotype");
    CHECK(store.entity(3).entity_type == "biological process");
}

TEST_CASE("jsonl dangling endpoint names the index") {
    std::string path = temp_path("qkg_dangling.jsonl");
    {
        std::ofstream out(path);
        out << R"({"entity":{"index":1,"id":"A","type":"drug","name":"a"}})" << "\n";
        out << R"({"relation":"indication","head":1,"tail":99})" << "\n";
    }
    CHECK_THROWS_WITH_AS(load_graph(path, GraphFormat::Jsonl), doctest::Contains("99"), Error);
    std::remove(path.c_str());
}

TEST_CASE("neighbors: isolated entity, mixed roles, unknown index") {
    GraphStore store = fixture_store();
    CHECK(store.neighbors(6).empty());
    // entity 1 appears as tail twice and head once
    CHECK(store.neighbors(1).size() == 3);
    CHECK_THROWS_AS(store.neighbors(42), Error);
}

TEST_CASE("neighbors equals a brute-force scan on the fixture") {
    GraphStore store = fixture_store();
    auto all = store.triplets();
    for (std::int64_t e : store.entity_indices()) {
        std::set<std::pair<std::int64_t, std::int64_t>> expected;
        std::vector<TripletRecord> scan;
        for (const auto& t : all)
            if (t.head == e || t.tail == e) scan.push_back(t);
        auto got = store.neighbors(e);
        REQUIRE(got.size() == scan.size());
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == scan[i]);
    }
}

TEST_CASE("neighbors property: random graphs match the naive filter") {
    std::mt19937 rng(7);
    for (int round = 0; round < 25; ++round) {
        GraphStore store = random_store(rng, 12, 30);
        auto all = store.triplets();
        for (std::int64_t e : store.entity_indices()) {
            std::vector<TripletRecord> scan;
            for (const auto& t : all)
                if (t.head == e || t.tail == e) scan.push_back(t);
            CHECK(store.neighbors(e) == scan);
        }
    }
}

TEST_CASE("adjacency occurrence totals equal the triplet count") {
    std::mt19937 rng(11);
    GraphStore store = random_store(rng, 10, 40);
    size_t head_total = 0, tail_total = 0;
    for (std::int64_t e : store.entity_indices()) {
        head_total += store.head_occurrences(e);
        tail_total += store.tail_occurrences(e);
    }
    CHECK(head_total == store.triplet_count());
    CHECK(tail_total == store.triplet_count());
}

TEST_CASE("search ranks exact, then prefix, then token subset") {
    GraphStore store = fixture_store();

    auto exact = store.search_entities("Nitrous oxide", 5);
    REQUIRE(!exact.empty());
    CHECK(exact[0].source_id == "DB06690");

    auto prefix = store.search_entities("nitrous", 5);
    REQUIRE(!prefix.empty());
    CHECK(prefix[0].source_id == "DB06690");

    // token-subset tier: word order does not matter
    auto tokens = store.search_entities("mellitus diabetes", 5);
    REQUIRE(!tokens.empty());
    CHECK(tokens[0].source_id == "MONDO:5015");

    CHECK_THROWS_AS(store.search_entities("  !!! ", 5), Error);
    CHECK(store.search_entities("glucose", 0).empty());
}

TEST_CASE("search finds the vaccine entity by full name") {
    GraphStore store;
    store.add_entity({20940, "DB:VZV", "DrugBank", "drug", "Varicella Zoster Vaccine"});
    store.add_entity({37766, "MONDO:influenza", "MONDO", "disease", "influenza"});
    store.add_entity({3, "DB:TDAP", "DrugBank", "drug", "Tetanus vaccine"});
    store.freeze();
    auto hits = store.search_entities("Varicella Zoster Vaccine", 3);
    REQUIRE(!hits.empty());
    CHECK(hits[0].index == 20940);
}

TEST_CASE("jsonl save/load round-trips the store") {
    GraphStore store = fixture_store();
    std::string path = temp_path("qkg_roundtrip.jsonl");
    save_graph_jsonl(store, path);
    GraphStore loaded = load_graph(path, GraphFormat::Jsonl);

    CHECK(loaded.entity_count() == store.entity_count());
    CHECK(loaded.triplet_count() == store.triplet_count());
    CHECK(loaded.entity_indices() == store.entity_indices());
    CHECK(loaded.triplets() == store.triplets());
    for (std::int64_t e : store.entity_indices()) CHECK(loaded.entity(e) == store.entity(e));

    // save -> load -> save produces identical bytes
    std::string path2 = temp_path("qkg_roundtrip2.jsonl");
    save_graph_jsonl(loaded, path2);
    std::ifstream a(path), b(path2);
    std::string content_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string content_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(content_a == content_b);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("binary cache round-trips and rejects foreign files") {
    GraphStore store = fixture_store();
    std::string path = temp_path("qkg_cache.bin");
    save_graph_cache(store, path);
    GraphStore loaded = load_graph_cache(path);
    CHECK(loaded.triplets() == store.triplets());
    CHECK(loaded.entity_indices() == store.entity_indices());

    std::ofstream(path, std::ios::trunc) << "not a cache";
    CHECK_THROWS_AS(load_graph_cache(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("store is immutable after freeze") {
    GraphStore store = fixture_store();
    CHECK_THROWS_AS(store.add_entity({7, "X", "", "drug", "x"}), Error);
    CHECK_THROWS_AS(store.add_triplet(1, "indication", 2), Error);
}

}  // TEST_SUITE
