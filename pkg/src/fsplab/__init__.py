"""Degenerate diffusion with finite speed of propagation: constitutive
analysis, a regularised solver, De Giorgi diagnostics and inequality audits."""
from __future__ import annotations

__version__ = "0.1.0"
