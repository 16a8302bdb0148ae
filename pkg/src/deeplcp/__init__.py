"""DeepLCP: questionnaire-based disease-probability prediction.

Pipeline: record ingestion and cleaning -> rule-based semantic
transformation (31x13 raw matrix) -> lossless reduction to an 18x13
matrix in risk-category bands -> CNN classification, with classical
baselines and a full evaluation suite on synthetic benchmark data.
"""

__version__ = "0.1.0"
