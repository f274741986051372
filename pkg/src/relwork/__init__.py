"""Extractive related-work generation: bibliography graph, tuned edge-type
usefulness, node embeddings, and a seq2seq sentence extractor."""

__version__ = "0.1.0"
