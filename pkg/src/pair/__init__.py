"""Perspective-aware reasoning over personal knowledge graphs.

The package turns a user prompt (or a batch of passive user-state signals)
into a grounded scene event for a simulated XR session, then feeds observed
engagement back into the user's Chronicle graph.
"""

__version__ = "0.1.0"
