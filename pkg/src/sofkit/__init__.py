"""Semantic objective functions: constraint distributions from logical
formulas, Fisher-Rao and KL losses on the simplex, and the experiment
harness around them."""

__version__ = "0.1.0"
