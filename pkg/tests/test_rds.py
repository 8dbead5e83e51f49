import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attractor_lab.cover import finite_scales
from attractor_lab.instances import random_block_constant, random_instance
from attractor_lab.metric import DomainError
from attractor_lab.randomset import FiniteUniverse, RandomSetFin, closed_random_hull
from attractor_lab.rds import (
    CocycleError, FiniteRDS, cocycle_check, invariance_check, lemma_tq2_check, make_finite_rds,
    omega_limit_estimate, omega_limit_exact, omega_limit_set, perfect, perfection_set,
)
from attractor_lab.systems.doublewell import DoubleWellFlow
from oracles import compose_phi, omega_limit_long_horizon, pullback_image_naive

seeds = st.integers(0, 2 ** 32 - 1)
PAIRS = [(s, t) for s in range(4) for t in range(4)]


def rotation_universe(m=3):
    return FiniteUniverse.full(np.full(m, 1.0 / m), np.roll(np.arange(m), -1))


class TestConstruction:
    def test_generators_must_be_block_constant(self):
        u = FiniteUniverse([0.5, 0.5], [0, 1], ((0, 1),))
        with pytest.raises(CocycleError):
            make_finite_rds(u, [[0, 1], [1, 0]])

    def test_two_sided_needs_bijections(self):
        with pytest.raises(CocycleError):
            make_finite_rds(FiniteUniverse.trivial(), [[0, 0]], two_sided=True)

    def test_out_of_range_generator(self):
        with pytest.raises(CocycleError):
            make_finite_rds(FiniteUniverse.trivial(), [[0, 2]])

    def test_negative_time_on_one_sided(self):
        c = make_finite_rds(FiniteUniverse.trivial(), [[1, 0]])
        with pytest.raises(DomainError):
            c.phi(-1, 0)

    def test_json_round_trip(self):
        c = random_instance(3, 7).rds
        d = FiniteRDS.from_dict(c.to_dict())
        assert np.array_equal(d.gens, c.gens) and d.universe == c.universe and d.two_sided == c.two_sided


class TestCocycle:
    @given(seeds)
    def test_identity_holds_on_generated_engines(self, seed):
        c = random_instance(seed, 0).rds
        rep = cocycle_check(c, PAIRS, np.arange(c.n))
        assert rep.ok and rep.max_residual == 0.0

    @given(seeds)
    def test_phi_matches_literal_composition(self, seed):
        c = random_instance(seed, 1).rds
        for w in range(c.universe.m):
            for t in range(6):
                assert np.array_equal(c.phi(t, w), compose_phi(c.gens, c.universe.shift, t, w))

    def test_two_sided_negative_times(self):
        c = make_finite_rds(rotation_universe(), [[1, 2, 0], [2, 0, 1], [0, 2, 1]], two_sided=True)
        pairs = [(s, t) for s in range(-3, 4) for t in range(-3, 4)]
        assert cocycle_check(c, pairs, np.arange(3)).ok

    def test_corrupted_table_is_reported(self):
        u = rotation_universe()
        c = make_finite_rds(u, [[1, 2, 0], [0, 0, 1], [2, 1, 1]])
        bad = FiniteRDS(u, c.gens, overrides={(2, 1): np.array([0, 0, 0])})
        rep = cocycle_check(bad, PAIRS, np.arange(3))
        assert not rep.ok
        assert 1 in rep.exceptional_omegas
        assert all(v["residual"] > 0 for v in rep.violations)

    def test_double_well_flow(self):
        rep = cocycle_check(DoubleWellFlow(), [(0.3, 0.7), (1.0, 2.0), (2.5, 0.25)],
                            np.linspace(-3, 3, 25), omegas=[0])
        assert rep.ok and rep.max_residual < 1e-9

    def test_continuous_needs_noise_samples(self):
        with pytest.raises(DomainError):
            cocycle_check(DoubleWellFlow(), [(1.0, 1.0)], [0.0])


class TestPerfection:
    def test_perfect_repairs_corruption(self):
        u = rotation_universe()
        gens = [[1, 2, 0], [0, 0, 1], [2, 1, 1]]
        bad = FiniteRDS(u, gens, overrides={(2, 1): np.array([0, 0, 0])})
        rep = cocycle_check(bad, PAIRS, np.arange(3))
        fixed = perfect(bad, rep)
        assert cocycle_check(fixed, PAIRS, np.arange(3)).ok

    def test_perfection_set_is_shift_invariant(self):
        u = FiniteUniverse.full([0.25] * 4, [1, 0, 3, 2])
        c = make_finite_rds(u, [[0, 1]] * 4)
        good = perfection_set(c, [2])
        assert good.tolist() == [True, True, False, False]
        assert np.array_equal(good[u.shift], good)

    def test_untouched_orbits_keep_their_dynamics(self):
        u = FiniteUniverse.full([0.25] * 4, [1, 0, 3, 2])
        c = make_finite_rds(u, [[1, 0], [1, 1], [0, 0], [0, 1]])
        fixed = perfect(c, [3])
        assert np.array_equal(fixed.gens[:2], c.gens[:2])
        assert np.array_equal(fixed.gens[2:], [[0, 1], [0, 1]])


class TestOmegaLimit:
    @given(seeds)
    def test_matches_long_horizon_intersection(self, seed):
        inst = random_instance(seed, 2)
        c = inst.rds
        for B in inst.family:
            for w in range(c.universe.m):
                # preperiod plus period stays far below 120 at these sizes
                ref = omega_limit_long_horizon(c.gens, c.universe.shift, B.sections_mask, w, 240)
                assert omega_limit_exact(c, B, w) == frozenset(np.flatnonzero(ref).tolist())

    @given(seeds)
    def test_pullback_images_match_naive(self, seed):
        inst = random_instance(seed, 3)
        c, B = inst.rds, inst.family[0]
        for w in range(c.universe.m):
            for t in range(12):
                assert np.array_equal(c.pullback_image(B, w, t),
                                      pullback_image_naive(c.gens, c.universe.shift, B.sections_mask, w, t))

    @given(seeds)
    def test_forward_invariance_always(self, seed):
        inst = random_instance(seed, 4)
        for B in inst.family:
            om = omega_limit_set(inst.rds, B)
            assert invariance_check(inst.rds, om, "forward", t_max=4).holds

    def test_constant_map(self):
        c = make_finite_rds(FiniteUniverse.trivial(), [[2, 2, 2, 2]])
        B = RandomSetFin.full(c.universe, 4)
        assert omega_limit_exact(c, B, 0) == frozenset({2})

    def test_permutation_keeps_whole_orbit(self):
        c = make_finite_rds(FiniteUniverse.trivial(), [[1, 2, 0, 3]])
        B = RandomSetFin.constant(c.universe, 4, [0])
        assert omega_limit_exact(c, B, 0) == frozenset({0, 1, 2})

    def test_empty_set(self):
        c = make_finite_rds(FiniteUniverse.trivial(), [[1, 0]])
        assert omega_limit_exact(c, RandomSetFin.empty(c.universe, 2), 0) == frozenset()


class TestInvariance:
    def test_strict_vs_forward(self):
        c = make_finite_rds(FiniteUniverse.trivial(), [[0, 0, 2]])
        D = RandomSetFin.constant(c.universe, 3, [0, 1])
        assert invariance_check(c, D, "forward").holds
        assert not invariance_check(c, D, "strict").holds

    def test_unknown_mode(self):
        c = make_finite_rds(FiniteUniverse.trivial(), [[0]])
        with pytest.raises(DomainError):
            invariance_check(c, RandomSetFin.full(c.universe, 1), "sideways")

    @given(seeds)
    def test_matches_enumeration_of_images(self, seed):
        inst = random_instance(seed, 5)
        c, D = inst.rds, inst.family[0]
        u = c.universe
        expect = True
        for w in np.flatnonzero(u.essential):
            for t in (1, 2):
                img = set(compose_phi(c.gens, u.shift, t, w)[D.sections_mask[w]].tolist())
                tgt = set(np.flatnonzero(D.sections_mask[u.shift_by(int(w), t)]).tolist())
                expect &= img == tgt
        assert invariance_check(c, D, "strict", t_max=2).holds == expect

    @given(seeds)
    def test_two_sided_omega_limits_strictly_invariant(self, seed):
        for k in range(40):
            inst = random_instance(seed, 100 + k)
            if inst.rds.two_sided:
                break
        else:
            return
        for B in inst.family:
            assert invariance_check(inst.rds, omega_limit_set(inst.rds, B), "strict", t_max=3).holds


class TestLimitLemma:
    def test_generated_instances_have_no_violations(self):
        for i in range(200):
            inst = random_instance(17, i)
            c = inst.rds
            for B in inst.family:
                K, _ = closed_random_hull(omega_limit_set(c, B).union(B), finite_scales(c.space))
                v = lemma_tq2_check(c, B, K)
                assert v.conclusions_hold, (i, v.to_dict())
                assert v.status == "pass"
                # an arbitrary K may break the premise; the conclusions must then still
                # hold wherever the premise does
                rng = np.random.default_rng(i)
                v2 = lemma_tq2_check(c, B, random_block_constant(rng, c.universe, c.n))
                assert v2.conclusions_hold

    def test_premise_failure_is_reported(self):
        c = make_finite_rds(FiniteUniverse.trivial(), [[1, 0]])
        B = RandomSetFin.constant(c.universe, 2, [0])
        v = lemma_tq2_check(c, B, RandomSetFin.constant(c.universe, 2, [0]))
        assert v.status == "premise-failure" and v.premise_failures == [0]

    @settings(max_examples=60)
    @given(seeds)
    def test_hull_preserves_invariance(self, seed):
        inst = random_instance(seed, 6)
        c = inst.rds
        scales = finite_scales(c.space)
        for B in inst.family:
            om = omega_limit_set(c, B)
            H, _ = closed_random_hull(om, scales)
            assert invariance_check(c, H, "forward", t_max=3).holds
            if invariance_check(c, om, "strict", t_max=3).holds:
                assert invariance_check(c, H, "strict", t_max=3).holds


class ContractingLine:
    """x -> x e^{-t}, pullback images collapse onto 0."""

    def pullback(self, omega, t, points):
        return np.asarray(points) * np.exp(-t)

    def distance(self, p, q):
        return np.abs(np.asarray(p) - np.asarray(q))


class TestOmegaEstimate:
    def test_contracting_flow_single_cluster(self):
        series = omega_limit_estimate(ContractingLine(), [-1.0, 0.5, 2.0], 0, [10, 20, 30], eps=1e-3, t_max=40)
        assert all(len(cl) == 1 for cl in series.clouds)
        assert abs(series.clouds[-1][0]) < 1e-3
        assert all(series.shrinking)

    def test_rejects_bad_input(self):
        with pytest.raises(DomainError):
            omega_limit_estimate(ContractingLine(), [1.0], 0, [], eps=0.1)
        with pytest.raises(DomainError):
            omega_limit_estimate(ContractingLine(), [1.0], 0, [1.0], eps=0.0)
