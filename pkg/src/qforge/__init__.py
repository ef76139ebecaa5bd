"""Adversarial variant construction and evaluation for fact-based visual QA.

The pipeline mines question templates from a QA corpus grounded in a
knowledge graph, expands sibling facts into same-question and same-answer
variants, balances image assignment, builds leakage-safe folds, and scores
prediction files. See the `cli` module for the staged command line interface.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .corpus import QaSample, load_corpus
from .kg import KgIndex, KgTriplet, load_kg, nearest_node
from .templates import QuestionTemplate, dedupe_templates, extract_template
from .variants import AdversarialSample, generate_all

__all__ = [
    "AdversarialSample",
    "KgIndex",
    "KgTriplet",
    "PipelineConfig",
    "QaSample",
    "QuestionTemplate",
    "__version__",
    "dedupe_templates",
    "extract_template",
    "generate_all",
    "load_config",
    "load_corpus",
    "load_kg",
    "nearest_node",
]
