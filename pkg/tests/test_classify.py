import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussmax import ManifoldChart, MembershipError, Regime, classify_field, classify_point, stationary_report
from gaussmax.classify import regime_from_dims
from gaussmax.io import read_mapping, charts_from_list, model_from_dict

from conftest import power_model

TABLE = "configs/d2_table.toml"
EXPECTED = {
    "beta1_gt_alpha1_gt_alpha2_gt_beta2": ((1, 0, 2), Regime.MIXED_MANIFOLD),
    "beta2_gt_alpha1": ((2, 0, 0), Regime.STATIONARY_LIKE_FULL),
    "beta1_eq_alpha1_gt_alpha2_gt_beta2": ((0, 1, 2), Regime.TRANSITION),
    "all_exponents_equal": ((0, 2, 0), Regime.TRANSITION),
}


def table_cases(root):
    for case in read_mapping(str(root / TABLE))["classify"]["cases"]:
        yield case["name"], model_from_dict(case["model"]), charts_from_list(case["charts"])


def axis_chart(lo, hi, target, name):
    return ManifoldChart.affine((0.0,), [[1.0]], (lo,), (hi,), target, name)


def test_classify_point_examples():
    assert classify_point(power_model([2.0], [4.0]), [0.5]).kset == "K0"
    v = classify_point(power_model([2.0], [2.0], c=2.0), [1.0])
    assert v.kset == "Kc" and v.h1 == pytest.approx(2.0, rel=1e-14)
    assert classify_point(power_model([2.0], [1.0]), [1.0]).kset == "Kinf"


def test_regime_is_function_of_dims():
    assert regime_from_dims((2, 0, 0), 2) is Regime.STATIONARY_LIKE_FULL
    assert regime_from_dims((1, 0, 2), 2) is Regime.MIXED_MANIFOLD
    assert regime_from_dims((1, 1, 2), 2) is Regime.MIXED_MANIFOLD
    assert regime_from_dims((0, 1, 2), 2) is Regime.TRANSITION
    assert regime_from_dims((0, 0, 2), 2) is Regime.TALAGRAND


def test_d2_table(repo_root):
    t0 = time.perf_counter()
    seen = {}
    for name, model, charts in table_cases(repo_root):
        rep = classify_field(model, charts)
        seen[name] = (rep.dims, rep.regime)
    assert seen == EXPECTED
    assert time.perf_counter() - t0 < 10.0


def test_refinement_invariance(repo_root):
    for name, model, charts in table_cases(repo_root):
        coarse = classify_field(model, charts, n=10)
        fine = classify_field(model, charts, n=20)
        assert coarse.regime is fine.regime and coarse.dims == fine.dims


def test_membership_failure_names_chart():
    m = power_model([2.0], [2.0])
    with pytest.raises(MembershipError) as info:
        classify_field(m, [axis_chart(0.1, 1.0, "K0", "wrong")])
    assert info.value.chart == "wrong"
    assert info.value.parameter is not None


def test_chart_outside_domain_rejected():
    m = power_model([2.0], [2.0])
    with pytest.raises(MembershipError):
        classify_field(m, [axis_chart(0.1, 1.5, "Kc", "long")])


def test_report_json():
    m = power_model([2.0], [1.0])
    rep = classify_field(m, [axis_chart(0.01, 1.0, "Kinf", "p"), axis_chart(-1.0, -0.01, "Kinf", "n")])
    d = json.loads(rep.to_json())
    assert d["dims_triple"] == [0, 0, 1] and d["regime"] == "Talagrand"
    assert all(c["verified"] for c in d["charts"])


def test_stationary_report():
    rep = stationary_report(power_model([1.0, 2.0]))
    assert rep.dims == (2, 0, 0)


def test_manifold_chart_checks():
    c = ManifoldChart.circle((0.0, 0.0), 0.5, "K0", 0.0, 2 * math.pi - 0.1)
    c.check_smooth()
    c.check_injective()
    assert c.gram_det(np.array([0.3])) == pytest.approx(0.25, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 2.0), st.floats(0.5, 2.0), st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5, 3.0]),
       st.floats(-1, 1), st.floats(-1, 1))
def test_verdict_scale_consistent(a1, a2, b, x, y):
    m = power_model([a1, a2], [b, b], lo=[-4, -4], hi=[4, 4])
    # coordinates far below 1e-2 need a longer ladder than the default
    t = np.array([x, y])
    if np.any(np.abs(t) < 1e-2):
        return
    assert classify_point(m, t).kset == classify_point(m, 2 * t).kset
