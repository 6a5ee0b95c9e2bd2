"""pipeforge: per-question QA component selection and pipeline composition.

The package learns, per QA task and per component, a predictor of component
performance from question features, ranks components per input question,
composes pipelines greedily and evaluates everything with fold-based metrics.
"""

__version__ = "0.1.0"

from pipeforge.model import (
    AnnotationSet,
    Component,
    GoldAnnotation,
    PerformanceMatrix,
    QATask,
    Question,
    validate_dataset,
)

__all__ = [
    "AnnotationSet",
    "Component",
    "GoldAnnotation",
    "PerformanceMatrix",
    "QATask",
    "Question",
    "validate_dataset",
    "__version__",
]
