"""Bridge server: encoder embeddings and input-embedding gradients over line JSON.

Hosts either a pretrained dual-encoder retriever (via transformers) or a
toy mean-pool model, and answers the five-bridge-op protocol on stdio or
TCP. The gradient op returns d(loss)/d(word embedding) rows for exactly
the attacker-controlled tokens.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = "aggd-bridge/1.0"
