"""Corpus-poisoning attack laboratory for dense retrievers.

Implements three token-swap attacks against dot-product dense retrieval
(AGGD tiered gradient search, HotFlip, random perturbation), exact top-k
inner-product evaluation, candidate-set-quality analysis and brute-force
oracles at desk scale. Real retrievers are reachable through a line-JSON
bridge protocol; two small built-in encoders cover everything else.
"""

__version__ = "0.1.0"
