"""Build context-augmented code-completion datasets and evaluate completion models."""

__version__ = "0.1.0"
