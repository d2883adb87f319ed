"""Learning symbolic world models by inventing predicates online while
exploring with skills."""

__version__ = "0.1.0"
