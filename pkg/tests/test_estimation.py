import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from conftest import random_params, random_seq
from ctxpairhmm.dp import path_log_prob
from ctxpairhmm.estimation import (
    CountStats,
    DegenerateStatisticsError,
    SaemConfig,
    apply_floor,
    complete_log_likelihood,
    m_step_full,
    m_step_reduced,
    reduced_q,
    saem_fit,
    sem_fit,
    sufficient_counts,
)
from ctxpairhmm.model import (
    DATA_SET_1,
    REDUCED_START,
    DomainError,
    EvoParams,
    InputError,
    expand_reduced,
    hky_context_emission,
    jc_emission,
    tkf91_transition,
    uniform_params,
)
from ctxpairhmm.sampler import AlignmentPath, sample_paths
from ctxpairhmm.simulate import SimSpec, simulate_pair

DS1 = expand_reduced(DATA_SET_1)
M, IX, IY = 0, 1, 2
A, C, G, T = range(4)


def random_counts(rng, regimes=1, scale=5.0):
    c = CountStats.zeros(regimes)
    return CountStats(*(rng.gamma(0.7, scale, size=getattr(c, k).shape) for k in CountStats._fields))


def random_path(rng, n, m, regimes=1):
    i = j = 0
    moves = []
    while (i, j) != (n, m):
        options = []
        if i < n and j < m:
            options += list(range(regimes))
        if i < n:
            options.append(regimes)
        if j < m:
            options.append(regimes + 1)
        s = int(rng.choice(options))
        moves.append(s)
        i += s < regimes or s == regimes
        j += s < regimes or s == regimes + 1
    return AlignmentPath(np.array(moves), regimes)


class TestCounts:
    def test_direct_counting(self):
        c = sufficient_counts(AlignmentPath.from_move_string("MMXM"), "ACGT", "ACT")
        visits = np.bincount([M, M, IX, M], minlength=3)
        assert visits.tolist() == [3, 1, 0]
        assert c.init.tolist() == [1, 0, 0]
        assert c.trans.tolist() == [[1, 1, 0], [1, 0, 0], [0, 0, 0]]
        assert c.ix.tolist() == [0, 0, 1, 0]
        assert c.match[0, A, A] == 1 and c.match.sum() == 2  # first move and T/T after the insert
        assert c.match[0, T, T] == 1
        assert c.context[0, A, A, C, C] == 1 and c.context.sum() == 1

    @pytest.mark.parametrize("L", [1, 2, 9])
    def test_all_match_counts(self, L):
        X = "ACGTACGTA"[:L]
        c = sufficient_counts(AlignmentPath.from_move_string("M" * L), X, X)
        assert c.context.sum() == L - 1
        assert c.match.sum() == 1

    def test_inconsistent_path(self):
        with pytest.raises(InputError):
            sufficient_counts(AlignmentPath.from_move_string("MM"), "ACG", "AC")

    @pytest.mark.parametrize("regimes", [1, 2])
    def test_complete_loglik_two_ways(self, rng, regimes):
        for _ in range(30):
            theta = random_params(rng, regimes)
            n, m = rng.integers(1, 12, size=2)
            X, Y = random_seq(rng, n), random_seq(rng, m)
            path = random_path(rng, n, m, regimes)
            direct = path_log_prob(theta, path.moves, X, Y)
            assert complete_log_likelihood(sufficient_counts(path, X, Y), theta) == pytest.approx(direct, rel=1e-12)

    @given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**32))
    @settings(max_examples=50, deadline=None)
    def test_conservation(self, n, m, seed):
        rng = np.random.default_rng(seed)
        path = random_path(rng, n, m)
        c = sufficient_counts(path, random_seq(rng, n), random_seq(rng, m))
        assert c.emission_total() == len(path)
        assert c.trans.sum() == len(path) - 1
        visits = np.bincount(path.moves, minlength=3)
        last = np.zeros(3)
        last[path.moves[-1]] = 1
        np.testing.assert_array_equal(c.trans.sum(axis=1), visits - last)
        assert all(np.all(getattr(c, k) >= 0) for k in CountStats._fields)

    def test_arithmetic(self, rng):
        a, b = random_counts(rng), random_counts(rng)
        np.testing.assert_allclose((a + b - b).context, a.context)
        np.testing.assert_allclose((a * 0.5).trans, a.trans / 2)
        np.testing.assert_allclose(CountStats.mean([a, b]).ix, (a.ix + b.ix) / 2)


class TestFullMStep:
    def test_transition_ratio(self):
        c = CountStats.zeros()
        c.trans[M, M] = c.trans[M, IX] = 1
        c.trans[IX, M] = c.trans[IY, M] = 1
        c.ix[:] = c.iy[:] = 1
        c.match[:] = 1
        c.context[:] = 1
        theta = m_step_full(c)
        assert theta.pi[M].tolist() == [0.5, 0.5, 0.0]
        np.testing.assert_array_equal(theta.pi0, theta.pi[M])

    def test_first_move_pools_into_match_row(self):
        c = CountStats.zeros()
        c.init[IY] = 1
        c.trans[M, M] = 1
        c.trans[IX, M] = c.trans[IY, M] = 1
        c.ix[:] = c.iy[:] = c.match[:] = c.context[:] = 1
        assert m_step_full(c).pi[M].tolist() == [0.5, 0.0, 0.5]

    def test_insert_emission_ratio(self):
        c = CountStats.zeros()
        c.ix[[A, C]] = [3, 1]
        c.trans[:] = c.iy[:] = c.match[:] = c.context[:] = 1
        assert m_step_full(c).f.tolist() == [0.75, 0.25, 0.0, 0.0]

    def test_degenerate_block_named(self):
        c = CountStats.zeros()
        c.trans[:] = c.ix[:] = c.match[:] = c.context[:] = 1
        with pytest.raises(DegenerateStatisticsError, match="I_Y"):
            m_step_full(c)
        with pytest.raises(DomainError):
            m_step_full(c, pseudo=-1)

    @pytest.mark.parametrize("context", ["cpg", "full", "off"])
    @given(seed=st.integers(0, 2**32))
    @settings(max_examples=25, deadline=None)
    def test_pseudo_gives_interior_simplex(self, context, seed):
        rng = np.random.default_rng(seed)
        c = random_counts(rng, regimes=int(rng.integers(1, 3)))
        c = c * 0.0 if seed % 5 == 0 else c
        theta = m_step_full(c, pseudo=1.0, context=context)
        for arr, axes in [(theta.pi, 1), (theta.pi0, 0), (theta.f, 0), (theta.g, 0),
                          (theta.h, (1, 2)), (theta.htilde, (3, 4))]:
            assert np.all(arr > 0)
            assert np.all(np.abs(arr.sum(axis=axes) - 1) < 1e-12)

    def test_context_structures(self, rng):
        c = random_counts(rng)
        off = m_step_full(c, context="off")
        cpg = m_step_full(c, context="cpg")
        full = m_step_full(c, context="full")
        for k in itertools.product(range(4), repeat=2):
            np.testing.assert_array_equal(off.htilde[0][k], off.h[0])
            if k != (C, C):
                np.testing.assert_array_equal(cpg.htilde[0][k], cpg.h[0])
        np.testing.assert_allclose(cpg.htilde[0, C, C], full.htilde[0, C, C])
        pooled = c.match[0] + c.context[0].sum(axis=(0, 1))
        np.testing.assert_allclose(off.h[0], pooled / pooled.sum())
        np.testing.assert_allclose(full.h[0], c.match[0] / c.match[0].sum())

    @given(seed=st.integers(0, 2**32))
    @settings(max_examples=40, deadline=None)
    def test_optimal_against_perturbations(self, seed):
        rng = np.random.default_rng(seed)
        counts = random_counts(rng)
        best = m_step_full(counts, context="full")
        q = complete_log_likelihood(counts, best)
        other = random_params(rng)
        for w in (0.01, 0.3, 1.0):
            mix = type(best)(*((1 - w) * getattr(best, k) + w * getattr(other, k)
                               for k in ("pi", "pi0", "f", "g", "h", "htilde")))
            mix = type(best)(mix.pi, mix.pi[0], mix.f, mix.g, mix.h, mix.htilde)
            assert complete_log_likelihood(counts, mix) <= q + 1e-9

    def test_two_cell_grid(self):
        # counts on two cells: the closed form beats every grid point
        for a, b in [(3, 1), (1, 1), (7, 2), (5, 0)]:
            c = CountStats.zeros()
            c.ix[[A, C]] = [a, b]
            c.trans[:] = c.iy[:] = c.match[:] = c.context[:] = 1
            p = m_step_full(c).f[A]
            grid = np.linspace(1e-6, 1 - 1e-6, 10001)
            vals = a * np.log(grid) + (b * np.log(1 - grid) if b else 0)
            assert abs(grid[np.argmax(vals)] - p) < 2e-4

    def test_floor(self):
        c = CountStats.zeros()
        c.trans[:] = c.ix[:] = c.iy[:] = c.context[:] = 1
        c.match[0, A, A] = 1
        theta = apply_floor(m_step_full(c), 1e-8)
        assert theta.h.min() >= 1e-8 * 0.99
        assert abs(theta.h.sum() - 1) < 1e-12
        assert apply_floor(theta, 0) is theta


def expected_counts(evo, length, seed):
    X, Y, path = simulate_pair(SimSpec(expand_reduced(evo), length=length, seed=seed))
    return sufficient_counts(path, X, Y)


@pytest.fixture(scope="module")
def big_counts():
    return expected_counts(DATA_SET_1, 200_000, seed=8)


class TestReducedMStep:
    def test_grid_oracle(self, big_counts):
        fit = m_step_reduced(big_counts, REDUCED_START)
        # Q separates into a lambda term, a gamma term and an (alpha, beta) term
        trans = big_counts.trans.copy()
        trans[0] += big_counts.init
        base, cc = self._blocks(big_counts)
        step = 0.005
        lam_grid = np.arange(step, 0.3, step)
        gam_grid = np.arange(step, 0.5, step)
        ab_grid = np.arange(step, 1.0, step)
        mu = REDUCED_START.mu

        def xlogy(c, p):
            return float(np.sum(np.where(c > 0, c * np.log(np.maximum(p, 1e-300)), 0)))

        lam = lam_grid[np.argmax([xlogy(trans, tkf91_transition(v)) for v in lam_grid])]
        gam = gam_grid[np.argmax([xlogy(base, jc_emission(v, mu)) for v in gam_grid])]
        ab = max(itertools.product(ab_grid, ab_grid[ab_grid < 0.6]),
                 key=lambda t: xlogy(cc, hky_context_emission(t[0], t[1], mu)))
        grid_best = np.array([ab[0], ab[1], gam, lam])
        got = np.array([fit.evo.alpha, fit.evo.beta, fit.evo.gamma, fit.evo.lam])
        truth = np.array([0.4, 0.2, 0.06, 0.04])
        assert np.all(np.abs(grid_best - truth) < 0.02)
        assert np.all(np.abs(got - truth) < 0.02)
        assert np.all(np.abs(got - grid_best) <= step)
        assert fit.q >= reduced_q(big_counts, EvoParams(*grid_best)) - 1e-6
        assert fit.improved and not fit.weakly_identified

    @staticmethod
    def _blocks(counts):
        from ctxpairhmm.estimation import _pool_match

        base, cc = _pool_match(counts, "cpg")
        return base[0], cc[0]

    def test_zero_context_counts_flagged(self, big_counts):
        c = big_counts.copy()
        c.context[0, C, C] = 0
        fit = m_step_reduced(c, REDUCED_START)
        assert fit.weakly_identified
        assert (fit.evo.alpha, fit.evo.beta) == (REDUCED_START.alpha, REDUCED_START.beta)
        assert abs(fit.evo.gamma - 0.06) < 0.02

    def test_monotone_over_random_counts(self, rng):
        for _ in range(100):
            counts = random_counts(rng, scale=float(rng.uniform(0.5, 50)))
            start = EvoParams(*rng.uniform(0.01, 1.5, size=4))
            fit = m_step_reduced(counts, start, max_restarts=1)
            assert fit.q >= reduced_q(counts, start) - 1e-9
            assert fit.q == pytest.approx(reduced_q(counts, fit.evo), rel=1e-12)

    def test_bounds_respected(self, big_counts):
        bounds = ((0.5, 1.0), (0.25, 1.0), (1e-4, 1.0), (1e-4, 1.0))
        fit = m_step_reduced(big_counts, EvoParams(0.8, 0.3, 0.1, 0.08), bounds)
        assert 0.5 <= fit.evo.alpha <= 1.0 and 0.25 <= fit.evo.beta <= 1.0
        with pytest.raises(DomainError):
            m_step_reduced(big_counts, REDUCED_START, ((0.0, 1.0),) * 4)

    def test_multi_regime_refused(self, rng):
        with pytest.raises(InputError):
            m_step_reduced(random_counts(rng, regimes=2), REDUCED_START)


class TestConfig:
    def test_paper_schedule(self):
        cfg = SaemConfig()
        assert [cfg.step_size(r) for r in (1, 100, 101, 102, 150)] == [1, 1, 1, 0.5, 1 / 50]
        assert [cfg.paths(r) for r in (1, 20, 21, 150)] == [5, 5, 10, 10]
        assert cfg.pseudo(100) == 0.1 and cfg.pseudo(101) == 0.0
        assert SaemConfig(mode="reduced").pseudo(1) == 0.0

    def test_step_sizes_in_unit_interval(self):
        cfg = SaemConfig(iterations=500, burn_in=37)
        steps = [cfg.step_size(r) for r in range(1, 501)]
        assert all(0 < s <= 1 for s in steps)

    @pytest.mark.parametrize("kw", [{"iterations": 0}, {"mode": "x"}, {"context": "y"},
                                    {"pseudo_count": -1}, {"step_sizes": (1.0,)}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            SaemConfig(**kw)


@pytest.fixture(scope="module")
def short_pair():
    X, Y, _ = simulate_pair(SimSpec(DS1, length=300, seed=21))
    return X, Y


class TestSaem:
    def test_schedule_compliance(self, short_pair):
        cfg = SaemConfig(iterations=30, burn_in=20, paths_schedule=((5, 2), (None, 3)), seed=1)
        tr = saem_fit(*short_pair, uniform_params(), cfg)
        assert len(tr) == 30 == len(tr.mean_complete_loglik)
        assert tr.step_sizes == [cfg.step_size(r) for r in range(1, 31)]
        assert tr.paths_per_iter == [2] * 5 + [3] * 25

    def test_zero_steps_freeze(self, short_pair):
        cfg = SaemConfig(iterations=8, burn_in=8, step_sizes=(0.0,) * 8, seed=2)
        tr = saem_fit(*short_pair, uniform_params(), cfg)
        for theta in tr.params[1:]:
            assert theta == tr.params[0]

    @pytest.mark.parametrize("mode", ["full", "reduced"])
    def test_seeded_determinism(self, short_pair, mode):
        init = uniform_params() if mode == "full" else REDUCED_START
        cfg = SaemConfig(iterations=6, burn_in=3, mode=mode, seed=3)
        a, b = saem_fit(*short_pair, init, cfg), saem_fit(*short_pair, init, cfg)
        assert a.mean_complete_loglik == b.mean_complete_loglik
        assert all(p == q for p, q in zip(a.params, b.params))
        c = saem_fit(*short_pair, init, SaemConfig(iterations=6, burn_in=3, mode=mode, seed=4))
        assert c.mean_complete_loglik != a.mean_complete_loglik

    def test_seed_recorded_when_absent(self, short_pair):
        tr = saem_fit(*short_pair, uniform_params(), SaemConfig(iterations=2))
        assert isinstance(tr.seed, int) and tr.config.seed == tr.seed

    def test_running_counts_follow_recursion(self, short_pair):
        # replay the recursion outside saem_fit with the same random streams
        X, Y = short_pair
        cfg = SaemConfig(iterations=4, burn_in=1, paths_schedule=((None, 2),), seed=5, floor=1e-8)
        tr = saem_fit(X, Y, uniform_params(), cfg)
        ss = np.random.SeedSequence(5)
        theta = uniform_params()
        running = CountStats.mean([sufficient_counts(p, X, Y) for p in sample_paths(theta, X, Y, 2, ss.spawn(1)[0])])
        for r in range(1, 5):
            stats = [sufficient_counts(p, X, Y) for p in sample_paths(theta, X, Y, 2, ss.spawn(1)[0])]
            running = running + cfg.step_size(r) * (CountStats.mean(stats) - running)
            theta = apply_floor(m_step_full(running, cfg.pseudo(r)), 1e-8)
            assert theta == tr.params[r - 1]

    def test_reduced_trace(self, short_pair):
        tr = saem_fit(*short_pair, REDUCED_START, SaemConfig(iterations=3, burn_in=2, mode="reduced", seed=6))
        assert len(tr.evo) == 3 and tr.final == expand_reduced(tr.final_evo)
        assert all(f["improved"] for f in tr.flags)

    def test_wrong_init_type(self, short_pair):
        with pytest.raises(InputError):
            saem_fit(*short_pair, uniform_params(), SaemConfig(mode="reduced"))
        with pytest.raises(InputError):
            saem_fit(*short_pair, REDUCED_START, SaemConfig())

    def test_multi_regime_full_mode(self, short_pair):
        tr = saem_fit(*short_pair, uniform_params(2), SaemConfig(iterations=5, burn_in=5, seed=7))
        assert tr.final.regimes == 2 and tr.final.pi.shape == (4, 4)

    def test_transient_rise(self):
        X, Y, _ = simulate_pair(SimSpec(DS1, length=2000, seed=1))
        tr = saem_fit(X, Y, uniform_params(), SaemConfig(iterations=6, burn_in=6, seed=3))
        ll = tr.mean_complete_loglik
        assert spearmanr(np.arange(6), ll).statistic > 0.8
        assert ll[-1] > ll[0] + 1000


class TestSem:
    def test_length_one_chain_stays_valid(self):
        tr = sem_fit("A", "C", uniform_params(), SaemConfig(iterations=20, burn_in=20, seed=1))
        assert set(tr.paths_per_iter) == {1} and set(tr.step_sizes) == {1.0}
        for theta in tr.params:
            assert np.all(np.abs(theta.pi.sum(axis=1) - 1) < 1e-12)
            assert np.all(theta.h > 0)

    def test_deterministic(self, short_pair):
        cfg = SaemConfig(iterations=5, burn_in=5, seed=2)
        a, b = sem_fit(*short_pair, uniform_params(), cfg), sem_fit(*short_pair, uniform_params(), cfg)
        assert all(p == q for p, q in zip(a.params, b.params))

    @pytest.mark.slow
    @pytest.mark.xfail(strict=False, reason="single-path SEM drifts toward paired gaps; see notes")
    def test_ergodic_average_of_pi_mm(self):
        X, Y, _ = simulate_pair(SimSpec(DS1, length=2000, seed=31))
        tr = sem_fit(X, Y, uniform_params(), SaemConfig(seed=31))
        avg = np.mean([theta.pi[0, 0] for theta in tr.params[-50:]])
        assert abs(avg - 0.9238) < 0.03


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="after a few iterations the burn-in chain is stationary; see notes")
def test_trend_over_burn_in():
    X, Y, _ = simulate_pair(SimSpec(DS1, length=2000, seed=12))
    tr = saem_fit(X, Y, uniform_params(), SaemConfig(iterations=100, seed=2))
    assert spearmanr(np.arange(100), tr.mean_complete_loglik).statistic > 0.8


@pytest.mark.slow
def test_reduced_mode_data_set_2():
    from ctxpairhmm.model import DATA_SET_2

    X, Y, _ = simulate_pair(SimSpec(expand_reduced(DATA_SET_2), length=2000, seed=41))
    tr = saem_fit(X, Y, REDUCED_START, SaemConfig(mode="reduced", seed=41))
    e = tr.final_evo
    got = np.array([e.alpha, e.beta, e.gamma, e.lam])
    truth = np.array([0.5, 0.15, 0.05, 0.02])
    sd = np.array([0.0772, 0.0296, 0.0079, 0.0024])
    assert np.all(np.abs(got - truth) < 3 * sd), got


def test_sem_keeps_pseudo_counts_on():
    X, Y, _ = simulate_pair(SimSpec(DS1, length=100, seed=2))
    tr = sem_fit(X, Y, uniform_params(), SaemConfig(iterations=3, burn_in=1, seed=1))
    assert tr.config.burn_in == 3 and tr.config.pseudo(3) == 0.1
