"""Property checkers and their verdicts."""
