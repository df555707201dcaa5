"""Reward engineering for reasoning traces: cleaning, grouped rubric data,
RM scoring, executor-uplift rewards and executable checks of their properties."""

from __future__ import annotations

__version__ = "0.1.0"
