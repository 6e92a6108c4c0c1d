from fractions import Fraction

import numpy as np
import pytest

from polaron1d import geometry as G
from polaron1d import paths as P

SEED = 31901


def dirichlet_survival(beta, L=1.0, n_terms=40):
    """Interval Dirichlet heat content over box volume, eigenfunction series."""
    n = np.arange(1, 2 * n_terms, 2)
    return float(np.sum((8 / (n**2 * np.pi**2)) * np.exp(-beta * n**2 * np.pi**2 / (8 * L**2))))


class TestAllowedSpins:
    def test_small_n(self):
        assert G.allowed_spins(2) == {Fraction(1), Fraction(0)}
        assert G.allowed_spins(3) == {Fraction(3, 2), Fraction(1, 2)}
        assert G.allowed_spins(1) == {Fraction(1, 2)}

    def test_counts(self):
        for N in range(1, 8):
            assert len(G.allowed_spins(N)) == N // 2 + 1

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            G.allowed_spins(0)


class TestSpinSector:
    def test_p_from_m(self):
        s = G.SpinSector.from_M(2, 0)
        assert s.p == 1 and s.M == 0
        s = G.SpinSector.from_M(3, Fraction(1, 2))
        assert s.p == 1 and s.M == Fraction(1, 2)
        s = G.SpinSector.from_M(3, Fraction(-3, 2))
        assert s.p == 3

    def test_m_in_allowed_set(self):
        for N in (1, 2, 3, 4):
            for p in range(N + 1):
                assert abs(G.SpinSector(N, p).M) in G.allowed_spins(N)

    def test_validation(self):
        with pytest.raises(ValueError):
            G.SpinSector(2, 3)
        with pytest.raises(ValueError):
            G.SpinSector(2, -1)
        with pytest.raises(ValueError):
            G.SpinSector.from_M(2, Fraction(1, 2))


class TestOrderedDomain:
    def test_volume(self):
        assert G.OrderedDomain(G.SpinSector(2, 1), 1.0).volume == pytest.approx(4.0)
        assert G.OrderedDomain(G.SpinSector(2, 2), 1.0).volume == pytest.approx(2.0)
        assert G.OrderedDomain(G.SpinSector(3, 2), 1.0).volume == pytest.approx(4.0)

    def test_contains_examples(self):
        d22 = G.OrderedDomain(G.SpinSector(2, 2), 1.0)
        assert G.contains(d22, [-0.5, 0.5]) is True
        assert G.contains(d22, [0.5, -0.5]) is False
        d21 = G.OrderedDomain(G.SpinSector(2, 1), 1.0)
        assert G.contains(d21, [0.5, -0.5]) is True
        assert G.contains(d21, [0.5, 1.5]) is False

    def test_coincidence_counts_as_exit(self):
        d = G.OrderedDomain(G.SpinSector(2, 2), 1.0)
        assert G.contains(d, [0.3, 0.3]) is False

    def test_dimension_mismatch(self):
        d = G.OrderedDomain(G.SpinSector(2, 1), 1.0)
        with pytest.raises(ValueError):
            G.contains(d, [0.1, 0.2, 0.3])

    def test_block_role_exchange(self):
        # Swapping the two chains (with relabeling) does not change
        # membership when the block sizes match.
        rng = np.random.default_rng(SEED)
        d = G.OrderedDomain(G.SpinSector(4, 2), 1.0)
        x = rng.uniform(-1.1, 1.1, size=(500, 4))
        swapped = np.concatenate([x[:, 2:], x[:, :2]], axis=1)
        assert np.array_equal(G.contains(d, x), G.contains(d, swapped))


class TestFirstExit:
    def test_constant_inside(self):
        d = G.OrderedDomain(G.SpinSector(2, 2), 1.0)
        states = np.tile([-0.5, 0.5], (11, 1))
        assert G.first_exit(states, d) is None

    def test_start_outside(self):
        d = G.OrderedDomain(G.SpinSector(2, 2), 1.0)
        states = np.array([[0.5, -0.5], [-0.5, 0.5]])
        assert G.first_exit(states, d) == 0

    def test_prefix_property(self):
        rng = np.random.default_rng(SEED + 1)
        d = G.OrderedDomain(G.SpinSector(2, 1), 1.0)
        grid = P.TimeGrid(2.0, 50)
        path = P.sample_brownian(np.zeros((40, 2)), grid, P.RngStream(SEED, 2))
        for s in path.states:
            j = G.first_exit(s, d)
            if j is None:
                for cut in (10, 25, 50):
                    assert G.first_exit(s[: cut + 1], d) is None
            else:
                assert G.first_exit(s[: j + 1], d) == j
                if j > 0:
                    assert G.first_exit(s[:j], d) is None


class TestSurvivalWeight:
    def test_far_from_constraints(self):
        d = G.OrderedDomain(G.SpinSector(1, 0), 1.0)
        dt = 0.01
        states = np.zeros((101, 1))  # distance 1 to each wall, 5*sqrt(dt)=0.5
        w = G.survival_weight(states, d, dt)
        assert w >= 1 - 1e-9
        assert w <= 1.0

    def test_touching_constraint_is_zero(self):
        d = G.OrderedDomain(G.SpinSector(1, 0), 1.0)
        states = np.array([[0.0], [1.0], [0.0]])
        assert G.survival_weight(states, d, 0.1) == 0.0
        d2 = G.OrderedDomain(G.SpinSector(2, 2), 1.0)
        states2 = np.array([[-0.2, 0.2], [0.1, 0.1]])
        assert G.survival_weight(states2, d2, 0.1) == 0.0

    def test_outside_is_zero(self):
        d = G.OrderedDomain(G.SpinSector(1, 0), 1.0)
        states = np.array([[0.0], [1.5], [0.0]])
        assert G.survival_weight(states, d, 0.1) == 0.0

    def test_at_most_one(self):
        rng = np.random.default_rng(SEED + 2)
        d = G.OrderedDomain(G.SpinSector(2, 1), 1.0)
        grid = P.TimeGrid(1.0, 30)
        path = P.sample_brownian(rng.uniform(-0.5, 0.5, (200, 2)), grid, P.RngStream(SEED, 3))
        logw = G.survival_log_weights(path.states, d, grid.dt)
        assert np.all(logw <= 0.0)

    def test_crude_survival_matches_heat_content(self):
        # At dt small enough that the missed-excursion bias of the crude
        # indicator sits inside the statistical band.
        n_paths, n_steps, n_blocks = 10**4, 16384, 10
        exact = dirichlet_survival(1.0)
        d = G.OrderedDomain(G.SpinSector(1, 0), 1.0)
        grid = P.TimeGrid(1.0, n_steps)
        rng = np.random.default_rng([SEED, 4])
        survived = 0
        for b in range(n_blocks):
            x0 = G.uniform_ordered_points(rng, n_paths // n_blocks, d)
            path = P.sample_brownian(x0, grid, P.RngStream(SEED, 5 + b))
            survived += int(np.sum(np.all(G.contains(d, path.states), axis=1)))
        crude = survived / n_paths
        sigma = np.sqrt(exact * (1 - exact) / n_paths)
        assert abs(crude - exact) < 3 * sigma

    def test_bridge_beats_crude(self):
        # At coarse dt the bridge-corrected estimate is much closer to the
        # exact Dirichlet value than the crude indicator.
        n_paths, n_steps = 10**4, 64
        exact = dirichlet_survival(1.0)
        d = G.OrderedDomain(G.SpinSector(1, 0), 1.0)
        grid = P.TimeGrid(1.0, n_steps)
        rng = np.random.default_rng([SEED, 6])
        x0 = G.uniform_ordered_points(rng, n_paths, d)
        path = P.sample_brownian(x0, grid, P.RngStream(SEED, 7))
        crude = float(np.mean(np.all(G.contains(d, path.states), axis=1)))
        logw = G.survival_log_weights(path.states, d, grid.dt)
        bridge = float(np.mean(np.exp(logw)))
        sigma = np.sqrt(exact * (1 - exact) / n_paths)
        assert abs(bridge - exact) < 3 * sigma
        assert abs(bridge - exact) < abs(crude - exact)


class TestUniformOrderedPoints:
    def test_all_inside(self):
        rng = np.random.default_rng(SEED + 3)
        for N, p in [(1, 0), (2, 1), (2, 2), (3, 2), (4, 2)]:
            d = G.OrderedDomain(G.SpinSector(N, p), 1.0)
            pts = G.uniform_ordered_points(rng, 2000, d)
            assert np.all(G.contains(d, pts))

    def test_sorted_pair_quadrant_mass(self):
        # For p = 2 the mass of {0 < x1 < x2} inside {x1 < x2} is 1/4.
        rng = np.random.default_rng(SEED + 4)
        d = G.OrderedDomain(G.SpinSector(2, 2), 1.0)
        pts = G.uniform_ordered_points(rng, 40000, d)
        frac = np.mean((pts[:, 0] > 0) & (pts[:, 1] > 0))
        sigma = np.sqrt(0.25 * 0.75 / 40000)
        assert abs(frac - 0.25) < 3 * sigma
