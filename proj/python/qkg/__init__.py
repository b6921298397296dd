"""Python bindings for the QKG toolkit.

The compiled extension normally sits next to this file (installed wheel).
For in-tree development builds, point QKG_EXT_DIR at the CMake output
directory containing the `_qkg` module.
"""

import os
import sys

_ext_dir = os.environ.get("QKG_EXT_DIR")
if _ext_dir and _ext_dir not in sys.path:
    sys.path.insert(0, _ext_dir)

from _qkg import (  # noqa: E402,F401
    EntityRecord,
    GraphStore,
    LabValue,
    PathEnumeration,
    PatientContext,
    QAResponse,
    QkgError,
    SignalSet,
    Subgraph,
    SubgraphStats,
    TripletRecord,
    __version__,
    adjusted_accuracy,
    build_subgraph,
    detect_signals,
    enumerate_onehop_paths,
    label_evidence,
    load_graph,
    mcnemar_exact,
    parse_patient_context,
    parse_qa_response,
    save_graph_jsonl,
)

__all__ = [
    "EntityRecord",
    "GraphStore",
    "LabValue",
    "PathEnumeration",
    "PatientContext",
    "QAResponse",
    "QkgError",
    "SignalSet",
    "Subgraph",
    "SubgraphStats",
    "TripletRecord",
    "__version__",
    "adjusted_accuracy",
    "build_subgraph",
    "detect_signals",
    "enumerate_onehop_paths",
    "label_evidence",
    "load_graph",
    "mcnemar_exact",
    "parse_patient_context",
    "parse_qa_response",
    "save_graph_jsonl",
]
