"""Cache-aided broadcast over packet erasure channels with state feedback.

Packet-level simulator (GF(2^8) coding, decentralized placement, a
feedback-driven multi-phase delivery engine, per-user decoding and a
feedback-free baseline) plus the closed-form analytics it is checked against.
"""

from .placement import SystemParams

__version__ = "0.1.0"

__all__ = ["SystemParams", "__version__"]
