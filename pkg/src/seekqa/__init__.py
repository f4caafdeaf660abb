"""Knowledge-path extraction and knowledge-fused answer scoring.

The pipeline grounds question and candidate text to concepts in a triple
store, extracts and filters link paths between them, and scores the five
candidates with a small graph-attention plus recurrent fusion model trained
from scratch on numpy. See the README for the command line entry points.
"""

from .errors import DataError, UsageError
from .kgstore import KnowledgeGraph, Triple, load_triples
from .sketch import Ablation, ModelDims, SketchModel, init_model
from .sonar import SonarConfig, extract_candidate, ground_concepts

__all__ = [
    "Ablation",
    "DataError",
    "KnowledgeGraph",
    "ModelDims",
    "SketchModel",
    "SonarConfig",
    "Triple",
    "UsageError",
    "extract_candidate",
    "ground_concepts",
    "init_model",
    "load_triples",
]

__version__ = "0.1.0"
