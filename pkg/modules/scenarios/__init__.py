"""Scenario files and builtin scenarios."""
