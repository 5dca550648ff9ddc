"""Corpus engineering and evaluation toolkit for food named-entity linking.

The package turns BioC-annotated food corpora into instruction-response
fine-tuning datasets, balances ontology-entity coverage with synthesized NEL
samples, plans leakage-free cross-validation folds, builds n-shot baseline
prompts, talks to (or simulates) a chat-completions endpoint, and scores
entity linking with macro-weighted metrics.
"""

__version__ = "0.1.0"
