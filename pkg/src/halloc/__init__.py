"""Toolkit for localizing context-grounded factual inconsistencies in generated text.

Detection strategies produce free-form error descriptions for a document/summary
pair; an LLM judge matches predictions against gold descriptions; metrics,
curation, and analysis utilities operate on the results.
"""

from halloc.data import (
    Dataset,
    DatasetStats,
    InconsistencyDescription,
    LabeledExample,
    dataset_stats,
    filter_split,
    letter_id,
    load_dataset,
    save_dataset,
    serialize_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetStats",
    "InconsistencyDescription",
    "LabeledExample",
    "dataset_stats",
    "filter_split",
    "letter_id",
    "load_dataset",
    "save_dataset",
    "serialize_dataset",
    "__version__",
]
