"""Shared builders for the test suite."""

import numpy as np
import pytest

from rangevar.ingest import IntensityKind, PolarObservation, ScanDataset, ScanMeta


def make_dataset(rows, kind=IntensityKind.RAW):
    """Dataset from (profile, vertical, horizontal, range, intensity) tuples."""
    obs = tuple(PolarObservation(*row) for row in rows)
    return ScanDataset(obs, ScanMeta(scanner_id="test", intensity_kind=kind))


def ladder_dataset(angle_values, ranges_per_angle, intensities_per_angle, profiles):
    """Repeat a vertical ladder over several profiles.

    ranges_per_angle / intensities_per_angle are (n_angles, n_profiles)
    arrays; rows are emitted profile-major like a real 2D scan.
    """
    rows = []
    for p in range(profiles):
        for i, angle in enumerate(angle_values):
            rows.append((p, float(angle), 0.0, float(ranges_per_angle[i][p]),
                         float(intensities_per_angle[i][p])))
    return make_dataset(rows)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
