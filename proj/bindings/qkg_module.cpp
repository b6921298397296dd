#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qkg/dataset_builder.hpp"
#include "qkg/gateway.hpp"
#include "qkg/graph_store.hpp"
#include "qkg/patient_context.hpp"
#include "qkg/pipeline.hpp"
#include "qkg/stats.hpp"
#include "qkg/subgraph.hpp"
#include "qkg/version.hpp"

namespace py = pybind11;
using namespace qkg;

PYBIND11_MODULE(_qkg, m) {
    m.doc() = "Context-dependent knowledge-graph validation toolkit";
    m.attr("__version__") = kVersion;

    py::register_exception<Error>(m, "QkgError");

    // ------------------------------------------------------------ graph
    py::class_<EntityRecord>(m, "EntityRecord")
        .def(py::init<>())
        .def_readwrite("index", &EntityRecord::index)
        .def_readwrite("source_id", &EntityRecord::source_id)
        .def_readwrite("source_vocab", &EntityRecord::source_vocab)
        .def_readwrite("entity_type", &EntityRecord::entity_type)
        .def_readwrite("name", &EntityRecord::name)
        .def("__repr__", [](const EntityRecord& e) {
            return "EntityRecord(" + std::to_string(e.index) + ", '" + e.name + "')";
        });

    py::class_<TripletRecord>(m, "TripletRecord")
        .def(py::init<>())
        .def_readwrite("head", &TripletRecord::head)
        .def_readwrite("relation", &TripletRecord::relation)
        .def_readwrite("tail", &TripletRecord::tail)
        .def("__repr__", [](const TripletRecord& t) {
            return "TripletRecord(" + std::to_string(t.head) + ", '" + t.relation + "', " +
                   std::to_string(t.tail) + ")";
        });

    py::class_<GraphStore>(m, "GraphStore")
        .def(py::init<>())
        .def("add_entity",
             [](GraphStore& store, std::int64_t index, const std::string& source_id,
                const std::string& entity_type, const std::string& name,
                const std::string& source_vocab) {
                 store.add_entity({index, source_id, source_vocab, entity_type, name});
             },
             py::arg("index"), py::arg("source_id"), py::arg("entity_type"), py::arg("name"),
             py::arg("source_vocab") = "")
        .def("add_triplet", &GraphStore::add_triplet)
        .def("freeze", &GraphStore::freeze)
        .def_property_readonly("entity_count", &GraphStore::entity_count)
        .def_property_readonly("triplet_count", &GraphStore::triplet_count)
        .def("entity", &GraphStore::entity, py::return_value_policy::copy)
        .def("neighbors", &GraphStore::neighbors)
        .def("search_entities", &GraphStore::search_entities, py::arg("query"),
             py::arg("limit") = 10)
        .def("triplets", &GraphStore::triplets);

    m.def("load_graph",
          [](const std::string& path, const std::string& format) {
              GraphFormat f = format == "csv" ? GraphFormat::Csv : GraphFormat::Jsonl;
              return load_graph(path, f);
          },
          py::arg("path"), py::arg("format") = "jsonl");
    m.def("save_graph_jsonl", &save_graph_jsonl);

    // --------------------------------------------------------- subgraph
    py::class_<SubgraphStats>(m, "SubgraphStats")
        .def_readonly("direct_triplets", &SubgraphStats::direct_triplets)
        .def_readonly("intermediate_entities", &SubgraphStats::intermediate_entities)
        .def_readonly("indirect_triplets", &SubgraphStats::indirect_triplets)
        .def_readonly("merged_triplets", &SubgraphStats::merged_triplets)
        .def_readonly("merged_entities_with_target", &SubgraphStats::merged_entities_with_target)
        .def_readonly("merged_entities_without_target",
                      &SubgraphStats::merged_entities_without_target)
        .def_readonly("entity_type_histogram", &SubgraphStats::entity_type_histogram)
        .def_readonly("relation_type_histogram", &SubgraphStats::relation_type_histogram);

    py::class_<Subgraph>(m, "Subgraph")
        .def_readonly("target", &Subgraph::target)
        .def_readonly("intermediates", &Subgraph::intermediates)
        .def_property_readonly("merged", [](const Subgraph& s) -> const GraphStore& { return s.merged; },
                               py::return_value_policy::reference_internal)
        .def_property_readonly("stats", &subgraph_stats);

    m.def("build_subgraph", &build_subgraph, py::arg("store"), py::arg("target"),
          py::keep_alive<0, 1>());

    // -------------------------------------------------------------- stats
    m.def("mcnemar_exact", &mcnemar_exact, py::arg("b"), py::arg("c"),
          "Exact two-sided McNemar p-value from discordant counts.");
    m.def("adjusted_accuracy", &adjusted_accuracy, py::arg("final_correct"), py::arg("n"),
          py::arg("n_leak_w2c") = 0, py::arg("n_ctx_c2w") = 0);

    py::class_<SignalSet>(m, "SignalSet")
        .def_readonly("kg_support", &SignalSet::kg_support)
        .def_readonly("kg_gap", &SignalSet::kg_gap)
        .def_readonly("parametric", &SignalSet::parametric)
        .def_readonly("context", &SignalSet::context);

    m.def("detect_signals",
          [](const std::string& evidence) { return SignalPatterns::builtin().detect(evidence); });
    m.def("label_evidence",
          [](const std::string& evidence) { return to_string(label_evidence(evidence)); });

    // ------------------------------------------------------------ gateway
    py::class_<QAResponse>(m, "QAResponse")
        .def_readonly("llm_answer_choice", &QAResponse::llm_answer_choice)
        .def_readonly("selected_option_text", &QAResponse::selected_option_text)
        .def_readonly("reasoning", &QAResponse::reasoning);

    m.def("parse_qa_response", &parse_qa_response);

    // ---------------------------------------------------- patient context
    py::class_<LabValue>(m, "LabValue")
        .def_readonly("name", &LabValue::name)
        .def_readonly("value", &LabValue::value)
        .def_readonly("unit", &LabValue::unit);

    py::class_<PatientContext>(m, "PatientContext")
        .def_property_readonly("age",
                               [](const PatientContext& c) { return c.age; })
        .def_property_readonly("sex",
                               [](const PatientContext& c) { return c.sex; })
        .def_readonly("diagnoses", &PatientContext::diagnoses)
        .def_readonly("labs", &PatientContext::labs)
        .def_readonly("medications", &PatientContext::medications)
        .def_readonly("other_factors", &PatientContext::other_factors)
        .def("to_json", &patient_context_to_json)
        .def("empty", &PatientContext::empty);

    m.def("parse_patient_context", &parse_patient_context_fallback,
          "Deterministic regex extraction of age, sex, and labs from question text.");

    // ----------------------------------------------------- dataset builder
    py::class_<PathEnumeration>(m, "PathEnumeration")
        .def_readonly("count", &PathEnumeration::count)
        .def_readonly("triplet_ids", &PathEnumeration::triplet_ids);

    m.def("enumerate_onehop_paths", &enumerate_onehop_paths, py::arg("aligned_indices"),
          py::arg("subgraph"));
}
