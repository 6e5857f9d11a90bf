import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahb.boxes import HyperBox
from ahb.errors import ConfigError, InfeasibleError, MethodUnavailableError
from ahb.predictor import ExternalModel, OracleModel
from ahb.simulation import DgpConfig, generate, make_oracle
from ahb.solver_fast import (
    FastParams,
    fast_all,
    fast_box,
    grid_variation,
    nearest_expansion_target,
)
from ahb.solver_mip import SolverParams, solve_all

from conftest import Const, Linear, Step, make_data, random_instance


def test_params_validation():
    with pytest.raises(ConfigError):
        FastParams(c=0.5)
    with pytest.raises(ConfigError):
        FastParams(grid_points_per_axis=1)
    with pytest.raises(ConfigError):
        FastParams(m=0)


def test_target_equal_gaps_go_down():
    X = np.array([[0.0], [0.4], [0.5], [0.9]])
    box = HyperBox([0.4], [0.5], 1)
    assert nearest_expansion_target(box, 0, X) == (0, "down")


def test_target_smaller_gap_wins():
    X = np.array([[0.3], [0.4], [0.5], [0.7]])
    box = HyperBox([0.4], [0.5], 1)
    assert nearest_expansion_target(box, 0, X) == (0, "down")
    X = np.array([[0.2], [0.4], [0.5], [0.55]])
    assert nearest_expansion_target(box, 0, X) == (3, "up")


def test_target_exhausted_axis():
    X = np.array([[0.4, 0.0], [0.5, 1.0]])
    assert nearest_expansion_target(HyperBox([0.4, 0.0], [0.5, 0.0], 0), 0, X) is None
    assert nearest_expansion_target(HyperBox([0.4, 0.0], [0.5, 0.0], 0), 1, X) == (1, "up")


def test_target_shared_coordinate_lowest_index():
    X = np.array([[0.5], [0.1], [0.1], [0.0]])
    assert nearest_expansion_target(HyperBox([0.5], [0.5], 0), 0, X) == (1, "down")


def test_grid_variation_constant_is_zero():
    m = OracleModel(Const(3.0), Const(1.0))
    assert grid_variation(HyperBox([0.0, 0.0], [1.0, 1.0], 0), HyperBox([0.0, 0.0], [2.0, 1.0], 0), m) == 0


@pytest.mark.parametrize("G", [2, 3, 5, 9])
def test_grid_variation_linear_closed_form(G):
    # f0 = x (slope 1 on the grown axis), f1 = 0
    m = OracleModel(Linear([1.0]), Linear([-1.0]))
    w = 0.8
    v = grid_variation(HyperBox([0.2], [0.2], 0), HyperBox([0.2], [0.2 + w], 0), m, G=G)
    # population variance of G evenly spaced points over width w
    assert v == pytest.approx(w**2 * (G + 1) / (12 * (G - 1)))


def test_grid_variation_other_axes_span_box():
    # f1 depends only on the non-grown axis, which spans [0, 1]
    m = OracleModel(Const(), Linear([0.0, 1.0]))
    old = HyperBox([0.0, 0.0], [0.0, 1.0], 0)
    new = HyperBox([0.0, 0.0], [0.5, 1.0], 0)
    assert grid_variation(old, new, m, G=5) == pytest.approx(np.var(np.linspace(0, 1, 5)))


def test_grid_variation_binary_axis_uses_levels():
    m = OracleModel(Linear([0.0, 1.0]), Const())
    old = HyperBox([0.0, 0.0], [0.5, 1.0], 0)
    new = HyperBox([0.0, 0.0], [0.9, 1.0], 0)
    # the binary axis contributes exactly {0, 1}: variance 0.25 on each surface
    assert grid_variation(old, new, m, G=5, kinds=("continuous", "binary")) == pytest.approx(0.5)


def test_grid_variation_needs_one_grown_bound():
    m = OracleModel(Linear([1.0]), Const())
    with pytest.raises(ValueError):
        grid_variation(HyperBox([0.0], [1.0], 0), HyperBox([0.0], [1.0], 0), m)


def test_constant_model_expands_to_bounding_box():
    rng = np.random.default_rng(0)
    d = make_data(rng.uniform(size=(10, 2)), [1, 0] * 5)
    sol = fast_box(0, d, OracleModel(Const(), Const()))
    assert sol.group.size == 10
    assert np.array_equal(sol.box.a, d.X.min(axis=0)) and np.array_equal(sol.box.b, d.X.max(axis=0))
    assert not sol.optimal


def test_step_function_stops_before_jump():
    # owner at 0.2, f jumps at 0.5; controls on both sides
    x = [0.2, 0.1, 0.3, 0.6, 0.7, 0.05]
    d = make_data(x, [1, 0, 0, 0, 0, 1])
    trace = []
    sol = fast_box(0, d, OracleModel(Step(0, 0.5), Const()), trace=trace)
    assert sol.box.a.tolist() == [0.05] and sol.box.b.tolist() == [0.3]
    assert sol.group.members.tolist() == [0, 1, 2, 5]
    assert len(trace) == 3


def test_trace_is_nested():
    d, m = random_instance(np.random.default_rng(4), n=15, p=3)
    for i in range(d.n):
        if d.T[i] == 0 and not np.any(d.T == 1):
            continue
        trace = []
        try:
            fast_box(i, d, m, trace=trace)
        except InfeasibleError:
            continue
        for prev, cur in zip(trace, trace[1:]):
            assert np.all(np.array(cur["a"]) <= np.array(prev["a"]))
            assert np.all(np.array(cur["b"]) >= np.array(prev["b"]))
            assert cur["step"] == prev["step"] + 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 3), c=st.floats(1.0, 4.0))
def test_constraints_hold(seed, m, c):
    rng = np.random.default_rng(seed)
    d, model = random_instance(rng)
    if int(np.sum(d.T == 0)) < m or not np.any(d.T == 1):
        return
    params = FastParams(m=m, c=c)
    for i in range(d.n):
        sol = fast_box(i, d, model, params)
        assert i in sol.group.members
        assert sol.group.n_c >= m
        assert np.any(d.T[sol.group.members] != d.T[i])
        assert np.all(d.X[sol.group.members] >= sol.box.a) and np.all(d.X[sol.group.members] <= sol.box.b)


def test_needs_m_controls():
    d = make_data([[0.0], [1.0], [2.0]], [1, 1, 0])
    with pytest.raises(InfeasibleError):
        fast_box(0, d, OracleModel(Const(), Const()), FastParams(m=2))


def test_control_owner_without_treated_is_infeasible():
    d = make_data([[0.0], [1.0]], [0, 0])
    with pytest.raises(InfeasibleError):
        fast_box(0, d, OracleModel(Const(), Const()))


def test_external_model_unavailable(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("id,f0,f1\n0,1,2\n1,1,2\n")
    d = make_data([[0.0], [1.0]], [1, 0])
    with pytest.raises(MethodUnavailableError):
        fast_box(0, d, ExternalModel.from_csv(p))


def test_deterministic_and_parallel():
    d, m = random_instance(np.random.default_rng(8), n=15, p=2)
    a = fast_all(d, m, FastParams(), workers=1)
    b = fast_all(d, m, FastParams(), workers=2)
    c = fast_all(d, m, FastParams(), workers=1)
    assert a.units == b.units == c.units
    for u in a.units:
        assert a[u].box == b[u].box == c[u].box


def test_objective_reports_loss():
    d, m = random_instance(np.random.default_rng(9), n=12, p=2)
    sol = fast_box(0, d, m, FastParams(beta=0.5))
    costs = [sol.per_unit_costs[k] for k in sol.group.members]
    assert sol.objective == pytest.approx(sum(costs) - 0.5 * len(costs))


@pytest.mark.parametrize("h_kind,split", [("Const", (1, 0, 1)), ("Binary", (1, 1, 2))])
def test_binary_data_matches_exact_solver(h_kind, split):
    cfg = DgpConfig(p_c=0, p_d=sum(split), n_confounding=split[0], n_treatment=split[1],
                    n_irrelevant=split[2], g_kind="Binary", h_kind=h_kind, n=80, seed=3)
    d, _ = generate(cfg)
    m = make_oracle(cfg)
    a = solve_all(d, m, SolverParams(normalize=True))
    b = fast_all(d, m, FastParams())
    assert a.units == b.units
    for u in a.units:
        assert a[u].group == b[u].group
