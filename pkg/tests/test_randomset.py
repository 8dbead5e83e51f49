import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attractor_lab.cover import finite_scales
from attractor_lab.instances import random_block_constant, random_instance
from attractor_lab.metric import DomainError, FiniteSpace
from attractor_lab.randomset import (
    FiniteUniverse, RandomSetFin, UniverseError, closed_random_hull, closed_random_hulls,
    dump_random_sets, is_measurable, load_random_sets, minimal_closed_cover_of_family,
    verein_representation,
)
from oracles import block_constant_maps, minimal_measurable_superset

HULL_BOUNDS = (4, 4, 3)
seeds = st.integers(0, 2 ** 32 - 1)


def scales_for(n):
    return finite_scales(FiniteSpace.discrete(n))


def two_point_one_block():
    return FiniteUniverse([0.5, 0.5], [0, 1], ((0, 1),))


class TestUniverse:
    def test_rejects_weight_changing_shift(self):
        with pytest.raises(UniverseError):
            FiniteUniverse([0.7, 0.3], [1, 0], ((0,), (1,)))

    def test_rejects_block_splitting_shift(self):
        with pytest.raises(UniverseError):
            FiniteUniverse([0.25] * 4, [1, 0, 2, 3], ((0, 2), (1, 3)))

    def test_rejects_non_partition(self):
        with pytest.raises(UniverseError):
            FiniteUniverse([0.5, 0.5], [0, 1], ((0,),))

    def test_essential_points(self):
        u = FiniteUniverse([0.5, 0.0, 0.5, 0.0], [0, 1, 2, 3], ((0, 1), (2,), (3,)))
        assert u.essential.tolist() == [True, True, True, False]

    def test_round_trip(self):
        u = random_instance(5, 0).universe
        assert FiniteUniverse.from_dict(u.to_dict()) == u


class TestMeasurability:
    def test_block_constant(self):
        u = two_point_one_block()
        assert is_measurable(RandomSetFin.constant(u, 2, [1]))

    def test_differs_inside_block(self):
        u = two_point_one_block()
        assert not is_measurable(RandomSetFin.from_sections(u, 2, [{0}, {1}]))

    def test_zero_weight_singleton_block_is_still_a_block(self):
        u = FiniteUniverse([1.0, 0.0], [0, 1], ((0,), (1,)))
        assert is_measurable(RandomSetFin.from_sections(u, 2, [{0}, {1}]))


class TestHull:
    def test_full_sigma_algebra_is_pointwise_closure(self):
        u = FiniteUniverse.full([0.2, 0.3, 0.5])
        K = RandomSetFin.from_sections(u, 3, [{0}, {1, 2}, set()])
        H, _ = closed_random_hull(K, scales_for(3))
        assert H.equal_on(K, where=np.ones(3, dtype=bool))

    def test_one_block_pools_sections(self):
        u = two_point_one_block()
        K = RandomSetFin.from_sections(u, 2, [{0}, {1}])
        H, _ = closed_random_hull(K, scales_for(2))
        assert H.sections() == [frozenset({0, 1})] * 2
        # all 16 block-constant maps (here the block is the whole universe) by brute force
        assert len(list(block_constant_maps(u.blocks, 2, 2))) == 4
        assert np.array_equal(H.sections_mask, minimal_measurable_superset(K.sections_mask, u.blocks, u.essential))

    def test_empty(self):
        u = two_point_one_block()
        H, _ = closed_random_hull(RandomSetFin.empty(u, 3), scales_for(3))
        assert not H.sections_mask.any()

    def test_no_scales(self):
        with pytest.raises(DomainError):
            closed_random_hull(RandomSetFin.empty(two_point_one_block(), 2), [])

    def test_trace_sets_are_block_unions(self):
        inst = random_instance(11, 3, HULL_BOUNDS)
        _, trace = closed_random_hull(inst.probe, finite_scales(inst.rds.space))
        u = inst.universe
        for sc in trace.scales:
            for g in range(sc.hits.shape[1]):
                assert u.is_measurable_mask(sc.measurable_hits[:, g])
                assert np.all(sc.measurable_hits[:, g] | ~sc.hits[:, g])
            assert np.allclose(sc.probability, u.weights @ sc.measurable_hits)

    @given(seeds)
    def test_matches_enumeration(self, seed):
        inst = random_instance(seed, 0, HULL_BOUNDS)
        K = inst.probe
        H, _ = closed_random_hull(K, finite_scales(inst.rds.space))
        u = inst.universe
        ref = minimal_measurable_superset(K.sections_mask, u.blocks, u.essential)
        assert np.array_equal(H.sections_mask[u.essential], ref[u.essential])
        assert H.is_measurable()
        assert K.subset_on(H)

    @given(seeds)
    def test_idempotent(self, seed):
        inst = random_instance(seed, 1, HULL_BOUNDS)
        scales = finite_scales(inst.rds.space)
        H, _ = closed_random_hull(inst.probe, scales)
        H2, _ = closed_random_hull(H, scales)
        assert H2.equal_on(H)

    @given(seeds)
    def test_monotone(self, seed):
        inst = random_instance(seed, 2, HULL_BOUNDS)
        rng = np.random.default_rng(seed)
        K = inst.probe
        L = RandomSetFin(inst.universe, K.sections_mask | (rng.random(K.sections_mask.shape) < 0.3))
        scales = finite_scales(inst.rds.space)
        assert closed_random_hull(K, scales)[0].subset_on(closed_random_hull(L, scales)[0])

    def test_batched_equals_single(self):
        inst = random_instance(4, 4, HULL_BOUNDS)
        scales = finite_scales(inst.rds.space)
        fam = [inst.probe] + inst.family
        for a, b in zip(closed_random_hulls(fam, scales), fam):
            assert a.equal_on(closed_random_hull(b, scales)[0], where=np.ones(inst.universe.m, dtype=bool))


class TestMinimalCover:
    def test_singleton_family_is_hull(self):
        inst = random_instance(8, 0, HULL_BOUNDS)
        scales = finite_scales(inst.rds.space)
        A, _ = minimal_closed_cover_of_family([inst.probe], scales)
        assert A.equal_on(closed_random_hull(inst.probe, scales)[0])

    def test_deterministic_universe_is_union(self):
        u = FiniteUniverse.trivial()
        fam = [RandomSetFin.constant(u, 5, [i]) for i in (0, 3)]
        A, _ = minimal_closed_cover_of_family(fam, scales_for(5))
        assert A.section(0) == frozenset({0, 3})

    def test_complementary_sections_in_one_block(self):
        u = two_point_one_block()
        K1 = RandomSetFin.from_sections(u, 2, [{0}, {1}])
        K2 = RandomSetFin.from_sections(u, 2, [{1}, {0}])
        A, _ = minimal_closed_cover_of_family([K1, K2], scales_for(2))
        ref = minimal_measurable_superset(K1.sections_mask | K2.sections_mask, u.blocks, u.essential)
        assert np.array_equal(A.sections_mask, ref)

    def test_empty_family(self):
        u = two_point_one_block()
        A, trace = minimal_closed_cover_of_family([], scales_for(2), universe=u, n=2)
        assert not A.sections_mask.any() and trace.certificate == ()
        with pytest.raises(DomainError):
            minimal_closed_cover_of_family([], scales_for(2))

    @given(seeds)
    def test_certificate_and_minimality(self, seed):
        rng = np.random.default_rng(seed)
        inst = random_instance(seed, 5, HULL_BOUNDS)
        u, n = inst.universe, inst.rds.n
        fam = [random_block_constant(rng, u, n) for _ in range(int(rng.integers(1, 5)))]
        A, trace = minimal_closed_cover_of_family(fam, finite_scales(inst.rds.space))
        assert A.equal_on(verein_representation(fam, trace.certificate))
        union = np.logical_or.reduce([K.sections_mask for K in fam])
        ref = minimal_measurable_superset(union, u.blocks, u.essential)
        assert np.array_equal(A.sections_mask[u.essential], ref[u.essential])


def test_json_round_trip():
    inst = random_instance(2, 2)
    text = dump_random_sets(inst.universe, inst.family)
    u, sets = load_random_sets(text)
    assert u == inst.universe
    assert all(np.array_equal(a.sections_mask, b.sections_mask) for a, b in zip(sets, inst.family))
