"""Recovery of a known directional decay from an encoded noise field.

Every one of 12 source directions carries independent noise decaying with
its own T60 (1.5 s to 2.5 s across the x axis); the field is encoded at
order 4 and analysed on the same 12 directions.
"""

import numpy as np
import pytest

from dirverb.decay import BandSpec, analyze_position
from dirverb.spherical import default_grid, max_re_weights
from dirverb.synth import anisotropic_t60, directional_noise_srir

GRID = default_grid(12)
TRUE_T60 = anisotropic_t60(GRID.vectors)
BANDS = BandSpec.default()


@pytest.fixture(scope="module")
def field():
    return directional_noise_srir(4, anisotropic_t60, duration_s=3.0, seed=0, sources=GRID)


def rel_error(m):
    return np.abs(m.t60_s / TRUE_T60 - 1)


@pytest.mark.xfail(strict=True, reason="order-4 transpose beams leak energy between "
                   "neighbouring directions, pulling every T60 toward the mean by ~15 %")
def test_plain_beams_recover_t60_within_5_percent(field):
    assert rel_error(analyze_position(field, GRID, BANDS)).max() <= 0.05


def test_plain_beams_preserve_ordering_with_bounded_bias(field):
    m = analyze_position(field, GRID, BANDS)
    for band in m.t60_s:
        assert np.corrcoef(band, TRUE_T60)[0, 1] > 0.95
        # the smearing contracts toward the mean, never beyond the true extremes
        assert TRUE_T60.min() - 0.05 < band.min() and band.max() < TRUE_T60.max() + 0.05
    assert rel_error(m).max() <= 0.20


def test_max_re_beams_recover_t60_within_5_percent(field):
    m = analyze_position(field, GRID, BANDS, degree_weights=max_re_weights(4))
    assert rel_error(m).max() <= 0.05
