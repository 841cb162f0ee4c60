"""Persona-grounded dialogue generation with topic-based persona word expansion."""

__version__ = "0.1.0"
