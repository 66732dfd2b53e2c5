"""Directional reverberation: decay analysis of spatial room impulse responses,
directional FDN design and rendering, and 6DoF parameter interpolation."""

__version__ = "0.1.0"

from .decay import (Band, BandSpec, DirectionalDecayMap, EdcCurve, analyze_dirirs,
                    analyze_position, band_filter, directional_edc, edc, edc0, edd,
                    estimate_edt, estimate_t60)
from .interp import IdwQuery, idw_weights, interpolate_map
from .spherical import (Direction, DirectionGrid, default_grid, max_re_weights, pwd, sh_eval,
                        sh_matrix)
from .srir_io import Srir, load_dataset, read_decay_map, write_decay_map

__all__ = [
    "Band", "BandSpec", "Direction", "DirectionGrid", "DirectionalDecayMap", "EdcCurve",
    "IdwQuery", "Srir", "analyze_dirirs", "analyze_position", "band_filter", "default_grid",
    "directional_edc", "edc", "edc0", "edd", "estimate_edt", "estimate_t60", "idw_weights",
    "interpolate_map", "load_dataset", "max_re_weights", "pwd", "read_decay_map", "sh_eval", "sh_matrix",
    "write_decay_map",
]
