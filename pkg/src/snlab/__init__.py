"""Schrodinger-Newton laboratory."""
