"""Numerical core: jets, expression language, linear algebra, metallic structures."""
