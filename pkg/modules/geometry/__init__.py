"""Pointwise submanifold geometry, vector fields and slant distributions."""
