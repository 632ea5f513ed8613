"""Regression with ordered rule sets learned from pseudo-classes.

Numeric targets are banded into contiguous pseudo-classes, a covering
learner induces an ordered rule set for them, and the rule set is pruned,
swap-optimized and selected by cross-validation. Regression trees, k-nearest
neighbors and hybrids of both with rules are included for comparison.
"""

__version__ = "0.1.0"
