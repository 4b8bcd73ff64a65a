"""Synthetic scan generator: layout, determinism, scaling, injection."""

import math

import numpy as np
import pytest

from rangevar.errors import InvalidConfig, NonPositiveRange
from rangevar.ingest import IntensityKind
from rangevar.simulate import (
    Board,
    CustomMonotoneScaling,
    GROUND_TRUTH_HEADER,
    InverseSquareScaling,
    OutlierInjection,
    SimulationConfig,
    TICK_STEP,
    ground_truth_to_csv,
    radar_intensity,
    simulate_profiles,
)

TRUTH = (29853.0, -1.02, 0.08)


def config(**overrides):
    base = dict(
        k_system=1e7,
        boards=(Board(0.5, 10.0, 0.0, 2, 50), Board(0.9, 25.0, 0.3, 3, 40)),
        truth_model=TRUTH,
        seed=7,
    )
    base.update(overrides)
    return SimulationConfig(**base)


# ---- radar equation ----------------------------------------------------------

def test_radar_linear_in_k_and_reflectivity():
    base = radar_intensity(1e6, 0.5, 10.0, 0.0)
    assert radar_intensity(2e6, 0.5, 10.0, 0.0) == pytest.approx(2 * base)
    assert radar_intensity(1e6, 1.0, 10.0, 0.0) == pytest.approx(2 * base)


def test_radar_inverse_square_in_range():
    near = radar_intensity(1e6, 0.5, 10.0, 0.0)
    far = radar_intensity(1e6, 0.5, 20.0, 0.0)
    assert near == pytest.approx(4 * far, rel=1e-14)


def test_radar_cosine_incidence():
    head_on = radar_intensity(1e6, 0.5, 10.0, 0.0)
    oblique = radar_intensity(1e6, 0.5, 10.0, math.pi / 3)
    assert oblique == pytest.approx(0.5 * head_on, rel=1e-12)
    # grazing incidence returns (numerically almost) nothing
    assert radar_intensity(1e6, 0.5, 10.0, math.pi / 2) == pytest.approx(0.0, abs=1e-10)


def test_radar_accepts_arrays_and_rejects_bad_range():
    out = radar_intensity(1e6, 0.5, np.array([10.0, 20.0]), 0.0)
    assert out.shape == (2,)
    with pytest.raises(NonPositiveRange):
        radar_intensity(1e6, 0.5, 0.0, 0.0)


# ---- config validation -------------------------------------------------------

def test_invalid_configs_rejected():
    with pytest.raises(InvalidConfig):
        config(k_system=0.0)
    with pytest.raises(InvalidConfig):
        config(boards=())
    with pytest.raises(InvalidConfig):
        config(boards=(Board(0.0, 10.0, 0.0, 1, 1),))
    with pytest.raises(InvalidConfig):
        config(boards=(Board(1.5, 10.0, 0.0, 1, 1),))
    with pytest.raises(InvalidConfig):
        config(boards=(Board(0.5, -1.0, 0.0, 1, 1),))
    with pytest.raises(InvalidConfig):
        config(boards=(Board(0.5, 10.0, math.pi / 2, 1, 1),))
    with pytest.raises(InvalidConfig):
        config(boards=(Board(0.5, 10.0, 0.0, 0, 1),))
    with pytest.raises(InvalidConfig):
        config(boards=(Board(0.5, 10.0, 0.0, 1, 0),))
    with pytest.raises(InvalidConfig):
        config(outlier_injection=OutlierInjection(fraction=1.0))
    with pytest.raises(InvalidConfig):
        config(seed=1.0)


def test_nonpositive_truth_sigma_rejected_at_generation():
    cfg = config(truth_model=(0.0, -1.0, -0.1))
    with pytest.raises(InvalidConfig):
        simulate_profiles(cfg)


def test_scaling_table_validation():
    with pytest.raises(InvalidConfig):
        CustomMonotoneScaling([1.0], [2.0])
    with pytest.raises(InvalidConfig):
        CustomMonotoneScaling([1.0, 2.0], [2.0])
    with pytest.raises(InvalidConfig):
        CustomMonotoneScaling([1.0, 1.0], [2.0, 3.0])
    with pytest.raises(InvalidConfig):
        CustomMonotoneScaling([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(InvalidConfig):
        InverseSquareScaling(0.0)


# ---- layout ------------------------------------------------------------------

def test_global_tick_ladder_and_row_counts():
    ds, truth = simulate_profiles(config())
    assert len(ds) == 2 * 50 + 3 * 40
    assert [t.tick_id for t in truth.ticks] == [0, 1, 2, 3, 4]
    assert [t.vertical_angle for t in truth.ticks] == pytest.approx(
        [(i + 1) * TICK_STEP for i in range(5)]
    )


def test_profile_major_emission_within_board():
    ds, _ = simulate_profiles(
        SimulationConfig(1e7, (Board(0.5, 10.0, 0.0, 2, 3),), TRUTH, seed=1)
    )
    angles = [o.vertical_angle for o in ds.observations]
    profiles = [o.profile_index for o in ds.observations]
    a1, a2 = TICK_STEP, 2 * TICK_STEP
    assert angles == pytest.approx([a1, a2, a1, a2, a1, a2])
    assert profiles == [0, 0, 1, 1, 2, 2]


def test_truth_matches_radar_equation_and_model():
    cfg = config()
    _, truth = simulate_profiles(cfg)
    a, b, c = TRUTH
    board_of_tick = [cfg.boards[0]] * 2 + [cfg.boards[1]] * 3
    for t, board in zip(truth.ticks, board_of_tick):
        expect_i = radar_intensity(
            cfg.k_system, board.reflectivity, board.distance, board.incidence_angle
        )
        assert t.true_intensity == pytest.approx(expect_i, rel=1e-14)
        assert t.true_sigma_mm == pytest.approx(a * expect_i**b + c, rel=1e-14)


def test_ranges_distributed_around_board_distance():
    cfg = SimulationConfig(1e7, (Board(0.5, 10.0, 0.0, 1, 4000),), TRUTH, seed=3)
    ds, truth = simulate_profiles(cfg)
    r = np.array([o.range for o in ds.observations])
    sigma_m = truth.ticks[0].true_sigma_mm / 1000.0
    assert abs(r.mean() - 10.0) < 5 * sigma_m / math.sqrt(len(r))
    assert r.std(ddof=1) == pytest.approx(sigma_m, rel=0.15)


# ---- determinism -------------------------------------------------------------

def test_bit_identical_for_identical_configs():
    d1, t1 = simulate_profiles(config())
    d2, t2 = simulate_profiles(config())
    assert d1 == d2
    assert t1 == t2


def test_seed_changes_draws():
    d1, _ = simulate_profiles(config(seed=7))
    d2, _ = simulate_profiles(config(seed=8))
    assert d1 != d2


def test_prepending_a_board_leaves_later_board_draws_alone():
    # per-board spawned generators: adding a board shifts tick ids but
    # must not change another board's noise
    solo = SimulationConfig(1e7, (Board(0.9, 25.0, 0.3, 3, 40),), TRUTH, seed=7)
    d_solo, _ = simulate_profiles(solo)
    ranges_solo = sorted(o.range for o in d_solo.observations)
    # same board in second position within the default config
    d_pair, _ = simulate_profiles(config())
    # n.b. spawn order: child 0 feeds board 0; board at index 1 gets a
    # different child stream than when it sits at index 0
    pair_second = sorted(o.range for o in d_pair.observations[100:])
    assert len(pair_second) == len(ranges_solo) == 120
    assert ranges_solo != pair_second


# ---- scaling -----------------------------------------------------------------

def test_raw_records_true_intensity():
    ds, truth = simulate_profiles(config(scaling=None))
    assert ds.meta.intensity_kind is IntensityKind.RAW
    by_angle = {t.vertical_angle: t.true_intensity for t in truth.ticks}
    for o in ds.observations:
        assert o.intensity == by_angle[o.vertical_angle]


def test_inverse_square_is_exactly_invertible_per_tick():
    r_ref = 10.0
    ds, truth = simulate_profiles(config(scaling=InverseSquareScaling(r_ref)))
    assert ds.meta.intensity_kind is IntensityKind.SCALED
    per_tick_ranges: dict[float, list[float]] = {}
    per_tick_recorded: dict[float, float] = {}
    for o in ds.observations:
        per_tick_ranges.setdefault(o.vertical_angle, []).append(o.range)
        per_tick_recorded[o.vertical_angle] = o.intensity
    for t in truth.ticks:
        mean_r = np.mean(per_tick_ranges[t.vertical_angle])
        back = per_tick_recorded[t.vertical_angle] * r_ref / mean_r**2
        assert back == pytest.approx(t.true_intensity, rel=1e-12)


def test_custom_monotone_preserves_intensity_order():
    table_true = [1.0, 1e3, 1e5, 1e7]
    table_rec = [0.1, 5.0, 80.0, 100.0]
    scaling = CustomMonotoneScaling(table_true, table_rec)
    assert scaling.apply(1e3) == 5.0
    assert scaling.apply(math.sqrt(1e3 * 1e3)) == 5.0
    cfg = config(
        boards=(
            Board(0.1, 30.0, 0.0, 1, 10),
            Board(0.5, 20.0, 0.0, 1, 10),
            Board(0.9, 10.0, 0.0, 1, 10),
        ),
        scaling=scaling,
    )
    ds, truth = simulate_profiles(cfg)
    assert ds.meta.intensity_kind is IntensityKind.SCALED
    rec_by_angle = {o.vertical_angle: o.intensity for o in ds.observations}
    ordered = sorted(truth.ticks, key=lambda t: t.true_intensity)
    recorded = [rec_by_angle[t.vertical_angle] for t in ordered]
    assert recorded == sorted(recorded)
    assert len(set(recorded)) == 3


# ---- outlier injection -------------------------------------------------------

def test_injection_count_and_indices():
    cfg = SimulationConfig(
        1e7,
        (Board(0.5, 10.0, 0.0, 2, 200),),
        TRUTH,
        outlier_injection=OutlierInjection(fraction=0.05, magnitude_sigma=10.0),
        seed=99,
    )
    ds, truth = simulate_profiles(cfg)
    assert len(truth.outlier_indices) == 2 * round(0.05 * 200)
    assert list(truth.outlier_indices) == sorted(set(truth.outlier_indices))
    sigma_m = truth.ticks[0].true_sigma_mm / 1000.0
    flagged = set(truth.outlier_indices)
    for i, o in enumerate(ds.observations):
        dev = abs(o.range - 10.0)
        if i in flagged:
            assert dev > 5 * sigma_m
        else:
            assert dev < 5 * sigma_m


def test_zero_magnitude_disables_injection():
    cfg = config(outlier_injection=OutlierInjection(fraction=0.1, magnitude_sigma=0.0))
    _, truth = simulate_profiles(cfg)
    assert truth.outlier_indices == ()


def test_tiny_fraction_rounds_to_zero_outliers():
    cfg = config(outlier_injection=OutlierInjection(fraction=0.001, magnitude_sigma=10.0))
    # 0.001 * 50 and 0.001 * 40 both round to 0
    _, truth = simulate_profiles(cfg)
    assert truth.outlier_indices == ()


# ---- alignment with preprocessing --------------------------------------------

def test_tick_ids_align_with_preprocess_grouping():
    from rangevar.preprocess import PreprocessConfig, preprocess

    ds, truth = simulate_profiles(config(seed=21))
    stats = preprocess(ds, PreprocessConfig(min_tick_count=10))
    assert [s.tick_id for s in stats] == [t.tick_id for t in truth.ticks]
    for s, t in zip(stats, truth.ticks):
        assert s.vertical_angle_center == pytest.approx(t.vertical_angle)
        assert s.mean_intensity == pytest.approx(t.true_intensity, rel=1e-14)


# ---- sidecar CSV -------------------------------------------------------------

def test_ground_truth_csv_layout():
    _, truth = simulate_profiles(config())
    lines = ground_truth_to_csv(truth).splitlines()
    assert lines[0] == GROUND_TRUTH_HEADER
    assert len(lines) == 1 + len(truth.ticks)
    first = truth.ticks[0]
    assert lines[1] == f"0,{first.true_intensity!r},{first.true_sigma_mm!r}"
