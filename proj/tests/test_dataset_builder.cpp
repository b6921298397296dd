#include <doctest.h>

#include <random>
#include <set>

#include "qkg/dataset_builder.hpp"

using namespace qkg;

namespace {

GraphStore aligned_store() {
    GraphStore store;
    store.add_entity({1, "C001", "UMLS", "disease", "one"});
    store.add_entity({2, "C002", "UMLS", "drug", "two"});
    store.add_entity({3, "C003", "UMLS", "phenotype", "three"});
    store.add_triplet(1, "rel", 2);
    store.add_triplet(2, "rel", 3);
    store.freeze();
    return store;
}

CandidateSample candidate(const std::string& id, size_t paths) {
    CandidateSample c;
    c.sample.id = id;
    c.sample.question = "q";
    c.sample.choices = {{'A', "a"}, {'B', "b"}};
    c.sample.gold = 'A';
    c.path_count = paths;
    return c;
}

}  // namespace

TEST_SUITE("dataset_builder") {

TEST_CASE("empty text list grounds to nothing") {
    CosineConceptIndex index = CosineConceptIndex::from_tables({{"C1", {1, 0}}}, {});
    CHECK(ground_entities({}, index).empty());
}

TEST_CASE("stage-1 entity extraction parses the reply and degrades to empty") {
    auto mock = std::make_shared<MockBackend>();
    mock->push_response("annotator", R"({"entities": ["diabetes mellitus", "metformin"]})");
    std::map<std::string, RoleConfig> roles;
    roles["annotator"] = {};
    roles["annotator"].max_retries = 0;
    Gateway gateway(roles, mock);
    auto texts = extract_entity_texts("A patient with diabetes on metformin.", gateway, "annotator");
    CHECK(texts == std::vector<std::string>{"diabetes mellitus", "metformin"});
    // queue exhausted: the next call fails and extraction returns empty
    CHECK(extract_entity_texts("another question", gateway, "annotator").empty());
    CHECK(extract_entity_texts("question", gateway, "missing-role").empty());
}

TEST_CASE("query equal to a stored vector scores 1.0") {
    CosineConceptIndex index = CosineConceptIndex::from_tables(
        {{"C1", {1, 0, 0}}, {"C2", {0, 1, 0}}}, {{"alpha", {1, 0, 0}}, {"beta", {0, 1, 0}}});
    auto grounded = ground_entities({"alpha", "beta", "unknown"}, index);
    REQUIRE(grounded.size() == 3);
    CHECK(grounded[0].concept_id == "C1");
    CHECK(grounded[0].score == doctest::Approx(1.0));
    CHECK(grounded[0].resolved);
    CHECK(grounded[1].concept_id == "C2");
    CHECK_FALSE(grounded[2].resolved);  // unresolvable texts stay flagged
}

TEST_CASE("five-concept fixture matches brute-force cosine ranking") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::vector<std::pair<std::string, std::vector<double>>> concepts;
    for (int i = 0; i < 5; ++i)
        concepts.push_back({"C" + std::to_string(i), {coord(rng), coord(rng), coord(rng)}});
    std::vector<double> query = {coord(rng), coord(rng), coord(rng)};
    CosineConceptIndex index = CosineConceptIndex::from_tables(concepts, {{"q", query}});

    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double d = 0, na = 0, nb = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            d += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return d / std::sqrt(na * nb);
    };
    std::string best;
    double best_score = -2;
    for (const auto& [id, vec] : concepts) {
        double s = dot(query, vec);
        if (s > best_score) {
            best_score = s;
            best = id;
        }
    }
    auto hits = index.lookup("q", 5);
    REQUIRE(hits.size() == 5);
    CHECK(hits[0].concept_id == best);
    CHECK(hits[0].score == doctest::Approx(best_score));
    for (size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].score >= hits[i].score);
}

TEST_CASE("direct alignment wins over hierarchy") {
    GraphStore store = aligned_store();
    HierarchyMap hierarchy = {{"C001", {"C002"}}};  // ancestor exists but direct match first
    std::vector<GroundedEntity> grounded(1);
    grounded[0].surface = "one";
    grounded[0].concept_id = "C001";
    grounded[0].resolved = true;
    auto aligned = align_to_kg(std::move(grounded), store, hierarchy);
    REQUIRE(aligned[0].kg_index.has_value());
    CHECK(*aligned[0].kg_index == 1);
    CHECK(aligned[0].method == AlignmentMethod::Direct);
}

TEST_CASE("hierarchy alignment walks ancestors breadth-first") {
    GraphStore store = aligned_store();
    HierarchyMap hierarchy = {{"CX", {"CY"}}, {"CY", {"C003"}}};
    std::vector<GroundedEntity> grounded(1);
    grounded[0].surface = "deep child";
    grounded[0].concept_id = "CX";
    grounded[0].resolved = true;
    auto aligned = align_to_kg(std::move(grounded), store, hierarchy);
    REQUIRE(aligned[0].kg_index.has_value());
    CHECK(*aligned[0].kg_index == 3);
    CHECK(aligned[0].method == AlignmentMethod::Hierarchy);
}

TEST_CASE("unmatched ancestors leave the entity unaligned") {
    GraphStore store = aligned_store();
    HierarchyMap hierarchy = {{"CX", {"CY"}}};
    std::vector<GroundedEntity> grounded(1);
    grounded[0].concept_id = "CX";
    grounded[0].resolved = true;
    auto aligned = align_to_kg(std::move(grounded), store, hierarchy);
    CHECK_FALSE(aligned[0].kg_index.has_value());
    CHECK_FALSE(aligned[0].method.has_value());
}

TEST_CASE("a cycle back to the start concept is an error naming it") {
    GraphStore store = aligned_store();
    HierarchyMap hierarchy = {{"CX", {"CY"}}, {"CY", {"CX"}}};
    std::vector<GroundedEntity> grounded(1);
    grounded[0].concept_id = "CX";
    grounded[0].resolved = true;
    CHECK_THROWS_WITH_AS(align_to_kg(std::move(grounded), store, hierarchy),
                         doctest::Contains("CX"), Error);
}

TEST_CASE("one-hop paths need two aligned endpoints") {
    GraphStore store = aligned_store();
    CHECK(enumerate_onehop_paths({}, store).count == 0);
    CHECK(enumerate_onehop_paths({1}, store).count == 0);
    PathEnumeration both = enumerate_onehop_paths({1, 2}, store);
    CHECK(both.count == 1);
    PathEnumeration all = enumerate_onehop_paths({1, 2, 3}, store);
    CHECK(all.count == 2);
}

TEST_CASE("path enumeration equals brute-force edge filtering on random fixtures") {
    std::mt19937 rng(21);
    for (int round = 0; round < 30; ++round) {
        GraphStore store;
        int n = 12;
        for (int i = 0; i < n; ++i)
            store.add_entity({i, "C" + std::to_string(i), "", "disease", "e" + std::to_string(i)});
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int i = 0; i < 25; ++i) store.add_triplet(pick(rng), "rel", pick(rng));
        store.freeze();

        std::vector<std::int64_t> aligned;
        for (int i = 0; i < n; ++i)
            if (std::bernoulli_distribution(0.4)(rng)) aligned.push_back(i);

        std::set<size_t> expected;
        std::set<std::int64_t> aligned_set(aligned.begin(), aligned.end());
        if (aligned_set.size() >= 2)
            for (size_t id = 0; id < store.triplet_count(); ++id) {
                TripletRecord t = store.triplet(id);
                if (aligned_set.count(t.head) && aligned_set.count(t.tail)) expected.insert(id);
            }
        PathEnumeration result = enumerate_onehop_paths(aligned, store);
        CHECK(result.count == expected.size());
        CHECK(std::set<size_t>(result.triplet_ids.begin(), result.triplet_ids.end()) == expected);
    }
}

TEST_CASE("rank_and_filter drops zero-path samples and is a stable top-k") {
    std::vector<CandidateSample> candidates = {candidate("s1", 3), candidate("s2", 0),
                                               candidate("s3", 2), candidate("s4", 2),
                                               candidate("s5", 1)};
    auto selected = rank_and_filter(candidates, 3);
    REQUIRE(selected.size() == 3);
    CHECK(selected[0].sample.id == "s1");
    CHECK(selected[1].sample.id == "s3");  // tie on 2 paths broken by id
    CHECK(selected[2].sample.id == "s4");

    auto all_zero = rank_and_filter({candidate("a", 0), candidate("b", 0)}, 5);
    CHECK(all_zero.empty());

    CHECK_THROWS_AS(rank_and_filter({}, 0), Error);
}

TEST_CASE("rank_and_filter output is a subset with no zero-path samples") {
    std::mt19937 rng(5);
    std::vector<CandidateSample> candidates;
    for (int i = 0; i < 40; ++i)
        candidates.push_back(candidate("c" + std::to_string(i),
                                       std::uniform_int_distribution<int>(0, 5)(rng)));
    auto selected = rank_and_filter(candidates, 10);
    CHECK(selected.size() <= 10);
    std::set<std::string> input_ids;
    for (const auto& c : candidates) input_ids.insert(c.sample.id);
    size_t last_count = SIZE_MAX;
    for (const auto& c : selected) {
        CHECK(c.path_count > 0);
        CHECK(input_ids.count(c.sample.id) == 1);
        CHECK(c.path_count <= last_count);
        last_count = c.path_count;
    }
}

}  // TEST_SUITE
