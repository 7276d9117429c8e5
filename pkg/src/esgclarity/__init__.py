"""ESG prospectus language-clarity pipeline.

Ingests fund prospectuses, isolates ESG investment-strategy language,
classifies each sentence's clarity (Specific / Ambiguous / Generic)
with few-shot fine-tuned classifiers, and scores, rates, and ranks the
fund universe by language transparency.
"""

__version__ = "0.1.0"

from .labels import AnnotationLabel, ClarityLabel, RelevanceLabel

__all__ = ["AnnotationLabel", "ClarityLabel", "RelevanceLabel", "__version__"]
