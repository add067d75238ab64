"""Symmetry audits: measured invariance metrics and the method comparison."""

import numpy as np
import pytest

from faframe.audit import (
    METHODS,
    SymmetryReport,
    audit_model,
    compare_methods,
    format_report_table,
)
from faframe.errors import NoForcesRequested
from faframe.faenet import FAENetConfig, FAENetModel
from faframe.geometry import SE3, AtomicSystem

CONFIG = FAENetConfig(
    hidden_channels=8,
    num_filters=8,
    num_gaussians=4,
    num_interactions=1,
    cutoff=4.0,
    max_neighbors=8,
)

FORCE_CONFIG = FAENetConfig(
    hidden_channels=8,
    num_filters=8,
    num_gaussians=4,
    num_interactions=1,
    cutoff=4.0,
    max_neighbors=8,
    predict_forces=True,
    force_head_hidden=8,
)


def fixed_systems(seed, count=4):
    rng = np.random.default_rng(seed)
    systems = []
    for _ in range(count):
        n = int(rng.integers(4, 8))
        systems.append(
            AtomicSystem(rng.standard_normal((n, 3)) * 1.5, rng.integers(1, 20, size=n))
        )
    return systems


def test_full_mode_is_invariant_to_machine_precision():
    model = FAENetModel(FORCE_CONFIG, np.random.default_rng(0))
    report = audit_model(
        model, fixed_systems(1), fa_mode="full", rng=np.random.default_rng(2)
    )
    assert report.pos == 1
    assert report.rot_i < 1e-6
    assert report.refl_i < 1e-6
    assert report.f_rot_e < 1e-6
    assert report.f_refl_e < 1e-6
    assert report.num_systems == 4
    assert report.degenerate_count == 0


def test_zeroed_model_has_exactly_zero_gaps():
    model = FAENetModel(CONFIG, np.random.default_rng(3))
    for p in model.parameters():
        p.data[...] = 0.0
    report = audit_model(
        model, fixed_systems(4), fa_mode="none", rng=np.random.default_rng(5)
    )
    # a constant-zero model is trivially invariant even without canonicalization
    assert report.rot_i == 0.0
    assert report.refl_i == 0.0
    assert report.pos == 0  # raw representations still differ


def test_none_mode_breaks_invariance():
    systems = fixed_systems(6)
    model = FAENetModel(CONFIG, np.random.default_rng(7))
    full = audit_model(model, systems, fa_mode="full", rng=np.random.default_rng(8))
    none = audit_model(model, systems, fa_mode="none", rng=np.random.default_rng(8))
    assert none.rot_i > full.rot_i
    assert none.rot_i > 1e-3
    assert none.pos == 0


def test_force_metrics_demand_force_head():
    model = FAENetModel(CONFIG, np.random.default_rng(9))
    with pytest.raises(NoForcesRequested):
        audit_model(model, fixed_systems(10), force_metrics=True)


def test_energy_only_model_reports_no_force_columns():
    model = FAENetModel(CONFIG, np.random.default_rng(11))
    report = audit_model(model, fixed_systems(12), rng=np.random.default_rng(13))
    assert report.f_rot_e is None
    assert report.f_refl_e is None
    payload = report.to_dict()
    assert payload["f_rot_e"] is None
    assert payload["schema_version"] == 1


def test_same_seed_same_report():
    systems = fixed_systems(14)
    model = FAENetModel(CONFIG, np.random.default_rng(15))
    a = audit_model(model, systems, fa_mode="none", rng=np.random.default_rng(16))
    b = audit_model(model, systems, fa_mode="none", rng=np.random.default_rng(16))
    assert a == b


def test_metrics_do_not_depend_on_system_order():
    systems = fixed_systems(17)
    model = FAENetModel(CONFIG, np.random.default_rng(18))
    fwd = audit_model(model, systems, fa_mode="none", rng=np.random.default_rng(19))
    rev = audit_model(
        model, list(reversed(systems)), fa_mode="none", rng=np.random.default_rng(19)
    )
    assert rev.rot_i == pytest.approx(fwd.rot_i, rel=1e-12)
    assert rev.refl_i == pytest.approx(fwd.refl_i, rel=1e-12)


def test_degenerate_systems_are_counted_and_skipped():
    systems = fixed_systems(20, count=3)
    systems.append(AtomicSystem(np.array([[0.0, 0.0, 0.0]]), np.array([6])))
    model = FAENetModel(CONFIG, np.random.default_rng(21))
    report = audit_model(model, systems, fa_mode="full", rng=np.random.default_rng(22))
    assert report.degenerate_count == 1
    assert report.num_systems == 3


def test_targets_produce_percent_column():
    systems = fixed_systems(23)
    model = FAENetModel(CONFIG, np.random.default_rng(24))
    report = audit_model(
        model, systems, fa_mode="none", targets=[1.0, 2.0, -3.0, 0.5],
        rng=np.random.default_rng(25),
    )
    assert report.pct_diff is not None
    assert np.isfinite(report.pct_diff)
    with pytest.raises(ValueError):
        audit_model(model, systems, targets=[1.0])


def test_compare_methods_covers_requested_methods():
    systems = fixed_systems(26, count=2)
    reports = compare_methods(
        CONFIG, systems, methods=["full", "none"], seed=3, num_transforms=3
    )
    assert set(reports) == {"full", "none"}
    assert reports["full"].group == "E3"
    assert reports["full"].rot_i < reports["none"].rot_i
    with pytest.raises(ValueError):
        compare_methods(CONFIG, systems, methods=["sideways"])


def test_compare_methods_se3_uses_se3_frames():
    systems = fixed_systems(27, count=2)
    reports = compare_methods(
        CONFIG, systems, methods=["se3_stochastic"], seed=4, num_transforms=3
    )
    assert reports["se3_stochastic"].group == SE3
    assert reports["se3_stochastic"].fa_mode == "stochastic"


def test_method_table_lists_all_modes():
    assert set(METHODS) == {"full", "stochastic", "se3_stochastic", "data_augment", "none"}


def test_format_report_table_alignment():
    report = SymmetryReport(
        pos=1, rot_i=0.12345, refl_i=0.5, pct_diff=None, f_rot_e=None,
        f_refl_e=None, num_systems=2, num_transforms=3, degenerate_count=0,
        fa_mode="full", group="E3",
    )
    text = format_report_table({"full": report})
    lines = text.splitlines()
    assert lines[0].startswith("method")
    assert "Rot-I" in lines[0] and "F-Refl-E" in lines[0]
    assert lines[1].startswith("full")
    assert "0.1235" in lines[1] or "0.1234" in lines[1]
    assert "-" in lines[1]
