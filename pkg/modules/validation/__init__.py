"""Identity checks and suites."""
