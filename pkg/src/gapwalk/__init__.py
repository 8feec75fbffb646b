"""gapwalk: decorated-expander graph families, exact spectral data, hidden-label
adjacency oracles, and classical exploration experiments."""

__version__ = "0.1.0"
