"""Hyperspectral contrastive-learning toolkit.

Desk-scale, from-first-principles implementation of an SE-gated grouped
residual backbone, NT-Xent contrastive pretraining on hyperspectral
patches, and the standard remote-sensing quality metric suite.
"""

__version__ = "0.1.0"
