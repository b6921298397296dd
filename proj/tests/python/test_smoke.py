import math

import pytest

import qkg


def test_mcnemar_matches_published_values():
    assert qkg.mcnemar_exact(39, 22) == pytest.approx(0.0396170149, abs=1e-9)
    assert qkg.mcnemar_exact(65, 70) == pytest.approx(0.7307894394, abs=1e-9)
    assert qkg.mcnemar_exact(0, 0) == 1.0
    assert qkg.mcnemar_exact(5, 0) == 0.0625


def test_adjusted_accuracy():
    assert qkg.adjusted_accuracy(2321, 2788, 60, 0) == pytest.approx(0.8288, abs=1e-4)
    with pytest.raises(qkg.QkgError):
        qkg.adjusted_accuracy(5, 10, 6, 0)


def test_graph_store_and_subgraph():
    store = qkg.GraphStore()
    store.add_entity(0, "MONDO:5015", "disease", "diabetes mellitus")
    store.add_entity(1, "DB1", "drug", "metformin")
    store.add_entity(2, "HP:1", "phenotype", "hyperglycemia")
    assert store.add_triplet(1, "indication", 0)
    assert not store.add_triplet(1, "indication", 0)  # dedup
    assert store.add_triplet(0, "phenotype present", 2)
    store.freeze()

    assert store.entity_count == 3
    assert store.triplet_count == 2
    assert len(store.neighbors(0)) == 2
    hits = store.search_entities("diabetes mellitus", limit=5)
    assert hits and hits[0].source_id == "MONDO:5015"

    sub = qkg.build_subgraph(store, 0)
    stats = sub.stats
    assert stats.direct_triplets == 2
    assert stats.merged_triplets == 2
    assert stats.merged_entities_with_target == 3


def test_signals_and_labels():
    assert qkg.label_evidence("marked AVOID in renal impairment") == "EV_CONTEXT"
    assert (
        qkg.label_evidence(
            "KG query returned an empty list. Medically, the claim is wrong."
        )
        == "EV_LEAKAGE"
    )
    signals = qkg.detect_signals("evidence-based applicability for this trial")
    assert not signals.context


def test_parse_qa_response():
    response = qkg.parse_qa_response(
        '{"llm_answer_choice": "d", "selected_option_text": "Shingles vaccine", "reasoning": "age"}'
    )
    assert response.llm_answer_choice == "D"
    with pytest.raises(qkg.QkgError):
        qkg.parse_qa_response("no json")


def test_patient_context_parser():
    ctx = qkg.parse_patient_context(
        "A 62-year-old woman with a platelet count of 95,000/mm3."
    )
    assert ctx.age == 62
    assert ctx.sex == "female"
    assert len(ctx.labs) == 1
    assert ctx.labs[0].name == "platelet count"
    assert math.isclose(ctx.labs[0].value, 95000.0)


def test_onehop_paths():
    store = qkg.GraphStore()
    for i in range(3):
        store.add_entity(i, f"C{i}", "disease", f"e{i}")
    store.add_triplet(0, "rel", 1)
    store.add_triplet(1, "rel", 2)
    store.freeze()
    assert qkg.enumerate_onehop_paths([0, 1], store).count == 1
    assert qkg.enumerate_onehop_paths([0], store).count == 0
