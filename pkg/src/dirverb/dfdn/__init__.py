"""Directional feedback delay network: design and rendering."""

from .geq import FilterCascade, FilterDesignError, design_cascade
from .network import (DesignRequest, DfdnConfig, coprime_delays, design, filter_targets,
                      input_gains_from_edc0, line_gain, per_sample_gain, random_orthogonal)
from .render import DfdnRenderer, impulse, render

__all__ = [
    "DesignRequest", "DfdnConfig", "DfdnRenderer", "FilterCascade", "FilterDesignError",
    "coprime_delays", "design", "design_cascade", "filter_targets", "impulse",
    "input_gains_from_edc0", "line_gain", "per_sample_gain", "random_orthogonal", "render",
]
