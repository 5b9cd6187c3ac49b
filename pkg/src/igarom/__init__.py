"""Reduced-order isogeometric analysis on FFD-parametrized domains."""
