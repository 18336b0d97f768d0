import numpy as np
import pytest

from pairsafe.dynamics import AIR_TAXI_PARAMS, ActionBounds, DynamicsKind, RelativeModel
from pairsafe.errors import EmptyTarget, NonConvergenceWarning
from pairsafe.grid import FieldKind, GridSpec, interpolate
from pairsafe.hj_solver import (
    SolveSettings,
    dissipation_coefficients,
    drift_players,
    hamiltonian,
    solve_cooperative_value,
    solve_time_to_reach,
    solve_worstcase_value,
    target_function,
)
from pairsafe.dynamics import DEFAULT_THRESHOLDS, WaypointThresholds

SI = DynamicsKind.SINGLE_INTEGRATOR
DI = DynamicsKind.DOUBLE_INTEGRATOR
AT = DynamicsKind.AIR_TAXI


def si_grid(n=41, half=4.0):
    return GridSpec.from_lists((n, n), (-half, -half), (half, half))


def interior(grid, half):
    x, y = grid.open_mesh()
    return np.broadcast_to((np.abs(x) <= half) & (np.abs(y) <= half), grid.shape)


class TestSettings:
    def test_defaults(self):
        s = SolveSettings()
        assert s.cfl == 0.5 and s.horizon is None
        assert s.scheme == "weno3" and s.time_order == 3
        assert SolveSettings(scheme="first_order").time_order == 1
        assert s.tol_for(DI) == pytest.approx(5e-4)
        assert s.tol_for(AT) == pytest.approx(0.67056)

    @pytest.mark.parametrize("kw", [dict(cfl=1.5), dict(convergence_tol=-1), dict(dissipation="local"), dict(horizon=0), dict(scheme="eno9")])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolveSettings(**kw)


class TestHamiltonian:
    @pytest.mark.parametrize("kind, cooperative", [(DI, True), (DI, False), (AT, True), (AT, False)])
    def test_bang_bang_matches_lattice(self, kind, cooperative):
        # oracle: brute force over 21 points per action component
        rng = np.random.default_rng(7)
        model = RelativeModel.for_kind(kind)
        grid = {DI: GridSpec.from_lists((5, 5, 5, 5), (-4, -4, -1, -1), (4, 4, 1, 1))}.get(kind)
        if grid is None:
            p = AIR_TAXI_PARAMS
            grid = GridSpec.from_lists((5, 5, 5, 3, 3), (-6e3, -6e3, -np.pi, p.v_min, p.v_min),
                                       (6e3, 6e3, np.pi, p.v_max, p.v_max), periodic=(2,))
        lat_i = model.bounds_i.lattice(21)
        lat_j = model.bounds_j.lattice(21)
        for _ in range(250):
            s = rng.uniform(grid.lo, grid.hi)
            p = rng.normal(size=grid.ndim) * rng.choice([0.01, 1.0, 100.0], size=grid.ndim)
            drift, players = drift_players(model, cooperative, states=list(s))
            h = float(hamiltonian(list(p), drift, players))
            d = np.array([float(v) for v in drift])
            gi = np.array([[float(v) for v in row] for row in players[0].g])
            gj = np.array([[float(v) for v in row] for row in players[1].g])
            ci = lat_i @ (gi.T @ p)
            cj = lat_j @ (gj.T @ p)
            brute = p @ d + ci.max() + (cj.max() if cooperative else cj.min())
            assert h == pytest.approx(brute, rel=1e-12, abs=1e-9)

    def test_dissipation_bounds_flow(self):
        grid = si_grid(9)
        model = RelativeModel.for_kind(SI)
        drift, players = drift_players(model, True, grid)
        np.testing.assert_allclose(dissipation_coefficients(grid, drift, players), [2.0, 2.0])


class TestToyAnalytic:
    def test_cooperative_equals_distance(self):
        grid = si_grid()
        f = solve_cooperative_value(SI, grid)
        assert f.converged and f.kind is FieldKind.COOPERATIVE
        np.testing.assert_allclose(f.values, grid.node_dist(), atol=2 * SolveSettings().tol_for(SI))

    def test_equal_authority_worst_case_equals_distance(self):
        grid = si_grid()
        f = solve_worstcase_value(SI, grid)
        assert f.converged
        np.testing.assert_allclose(f.values, grid.node_dist(), atol=2 * SolveSettings().tol_for(SI))

    def _box_game_errors(self, scheme, sizes=(41, 81)):
        # stronger pursuer: exact value is the distance of the point to a box of half-width 0.5 * tau
        strong = (ActionBounds((-0.5, -0.5), (0.5, 0.5)), ActionBounds((-1, -1), (1, 1)))
        errs = []
        for n in sizes:
            grid = si_grid(n)
            f = solve_worstcase_value(SI, grid, SolveSettings(horizon=1.0, scheme=scheme), bounds=strong)
            x, y = grid.open_mesh()
            exact = np.hypot(np.maximum(np.abs(x) - 0.5, 0), np.maximum(np.abs(y) - 0.5, 0))
            errs.append(np.mean(np.abs(f.values - exact)[interior(grid, 2.0)]))
        return errs

    @pytest.mark.parametrize("scheme, min_order", [("first_order", 0.8), ("weno3", 1.1)])
    def test_refinement_order(self, scheme, min_order):
        errs = self._box_game_errors(scheme)
        order = np.log2(errs[0] / errs[1])
        assert order >= min_order, errs

    def test_weno_beats_first_order(self):
        coarse = self._box_game_errors("first_order", (41,))[0]
        fine = self._box_game_errors("weno3", (41,))[0]
        assert fine < 0.25 * coarse

    def test_finite_horizon_lands_exactly(self):
        f = solve_worstcase_value(SI, si_grid(21), SolveSettings(horizon=0.37),
                                  bounds=(ActionBounds((-0.5, -0.5), (0.5, 0.5)), ActionBounds((-1, -1), (1, 1))))
        assert f.metadata["horizon"] == pytest.approx(0.37, abs=1e-12)
        assert f.converged

    def test_max_iters_warns(self):
        strong = (ActionBounds((-0.5, -0.5), (0.5, 0.5)), ActionBounds((-1, -1), (1, 1)))
        with pytest.warns(NonConvergenceWarning):
            f = solve_worstcase_value(SI, si_grid(21), SolveSettings(max_iters=3), bounds=strong)
        assert not f.converged and f.metadata["iterations"] == 3

    def test_grid_dimension_checked(self):
        with pytest.raises(ValueError):
            solve_cooperative_value(DI, si_grid(9))


class TestMarching:
    def _trace(self, kind, grid, cooperative, settings=None):
        hist = []
        solve = solve_cooperative_value if cooperative else solve_worstcase_value

        def cb(it, values, residual):
            hist.append((values.copy(), residual))

        f = solve(kind, grid, settings, on_iteration=cb)
        return f, hist

    @pytest.mark.parametrize("cooperative", [True, False])
    def test_values_non_increasing_and_residual_monotone(self, cooperative):
        grid = GridSpec.from_lists((21, 21, 11, 11), (-4, -4, -1, -1), (4, 4, 1, 1))
        settings = None if cooperative else SolveSettings(horizon=0.4)
        f, hist = self._trace(DI, grid, cooperative, settings)
        prev = grid.node_dist()
        for values, _ in hist:
            assert np.all(values <= prev)
            prev = values
        res = [r for _, r in hist]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(res[10:], res[11:]))
        assert np.all(f.values <= grid.node_dist())

    def test_metadata_recorded(self):
        f = solve_cooperative_value(SI, si_grid(11))
        for key in ("converged", "residual", "iterations", "horizon", "dt", "alphas", "settings", "tol", "wall_time"):
            assert key in f.metadata


class TestDoubleIntegratorFields:
    def test_inequalities_every_node(self, di_fields, di_worst_converged):
        coop, _ = di_fields
        worst = di_worst_converged
        tol = 2 * SolveSettings().tol_for(DI)
        assert coop.converged and worst.converged
        dist = coop.spec.node_dist()
        assert np.all(coop.values <= dist + tol)
        assert np.all(worst.values <= coop.values + tol)

    def test_safe_set_nesting(self, di_fields):
        coop, _ = di_fields
        assert np.all((coop.values >= 0.6) <= (coop.values >= 0.5))

    def test_look_ahead_field_dominates_converged(self, di_fields, di_worst_converged):
        # a shorter game leaves the pursuer less time, so values can only be larger
        _, worst = di_fields
        assert np.all(worst.values >= di_worst_converged.values - 1e-12)

    def test_head_on_value_below_distance(self, di_fields):
        # closing at 2 m/s from 1 m apart: even full braking cannot keep the start distance
        coop, _ = di_fields
        assert coop((1.0, 0.0, -1.0, 0.0)) < 0.95


@pytest.fixture(scope="module")
def ttr_pair():
    p = AIR_TAXI_PARAMS
    out = []
    for n in (41, 81):
        grid = GridSpec.from_lists((n, n, 24, 5), (-3000, -3000, -np.pi, p.v_min), (3000, 3000, np.pi, p.v_max), periodic=(2,))
        out.append(solve_time_to_reach(grid=grid))
    return out


class TestTimeToReach:
    def test_target_function_sign(self):
        th = DEFAULT_THRESHOLDS[AT]
        v = AIR_TAXI_PARAMS.v_nominal
        assert target_function((0.0, 0.0, 0.0, v), th, v) < 0
        assert target_function((299.0, 0.0, 0.7, v + 19.0), th, v) < 0
        assert target_function((301.0, 0.0, 0.0, v), th, v) > 0
        assert target_function((0.0, 0.0, np.pi / 4 + 0.01, v), th, v) > 0
        assert target_function((0.0, 0.0, 0.0, v + 21.0), th, v) > 0

    def test_empty_target(self):
        tiny = WaypointThresholds(1.0, 0.01, 0.01)
        grid = GridSpec.from_lists((5, 5, 8, 3), (-3000, -3000, -np.pi, 31.0), (3000, 3000, np.pi, 90.0), periodic=(2,))
        with pytest.raises(EmptyTarget):
            solve_time_to_reach(tiny, grid)

    def test_target_nodes_hold_zero(self, ttr_pair):
        f = ttr_pair[0]
        init = target_function(f.spec.open_mesh(), DEFAULT_THRESHOLDS[AT], AIR_TAXI_PARAMS.v_nominal)
        inside = np.broadcast_to(init <= 0, f.spec.shape)
        assert np.all(f.values[inside] == 0.0)
        assert f.metadata["unreachable"] == int(np.isinf(f.values).sum())

    def test_straight_line_flight(self, ttr_pair):
        p = AIR_TAXI_PARAMS
        v, d = p.v_nominal, 2000.0
        th = DEFAULT_THRESHOLDS[p.kind]
        run = d - th.dist
        # exact optimum on the nose: full throttle, then brake to the top of the speed window
        acc, brake = p.bounds.hi[1], -p.bounds.lo[1]
        v_end = v + th.speed
        peak = np.sqrt((run + v**2 / (2 * acc) + v_end**2 / (2 * brake)) / (1 / (2 * acc) + 1 / (2 * brake)))
        assert peak < p.v_max
        best = (peak - v) / acc + (peak - v_end) / brake
        # no vehicle beats its top speed, so this bound also holds on coarse grids
        floor = run / p.v_max
        coarse, fine = (interpolate(f, (-d, 0.0, 0.0, v)) for f in ttr_pair)
        assert floor <= best <= fine <= coarse
        assert fine == pytest.approx(best, rel=0.15)

    def test_aligned_ray_monotone(self, ttr_pair):
        v = AIR_TAXI_PARAMS.v_nominal
        t = [interpolate(ttr_pair[1], (-d, 0.0, 0.0, v)) for d in (600, 1200, 1800, 2400)]
        assert all(b > a for a, b in zip(t, t[1:]))

    def test_heading_reversal_lower_bound(self, ttr_pair):
        v = AIR_TAXI_PARAMS.v_nominal
        omega = AIR_TAXI_PARAMS.bounds.hi[0]
        for f in ttr_pair:
            assert interpolate(f, (1500.0, 0.0, 0.0, v)) >= np.pi / omega
