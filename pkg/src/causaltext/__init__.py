"""Synthetic relational-text datasets from random causal graphs, plus an
evaluation harness for probability-scoring models on causal-relation
inference."""

__version__ = "0.1.0"
