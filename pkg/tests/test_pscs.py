import math
import random

import pytest

import bnqubo as bq
from bnqubo.cart import score, train_cart, used_variables
from bnqubo.pscs import IncompleteCandidatesError, SearchLimits, lookup_score, run_pscs
from util import make_copy_dataset, small_instance, subset_coverage_scan


class TestRunSearch:
    def test_infinite_threshold_single_record(self):
        ds = make_copy_dataset(rows=100)
        cl = run_pscs(ds, 1, math.inf)
        assert cl.num_trainings == 1
        assert cl.num_candidates == 1
        rec = cl.records[0]
        assert rec.used == frozenset()
        assert rec.allowed == frozenset({0, 2})
        assert cl.family[0].parents == frozenset()
        assert cl.family[0].score == pytest.approx(100 * math.log(2), rel=1e-12)

    def test_single_parent_chain(self):
        # target b is an exact copy of a: one training finds {a}, removing it
        # leaves only noise, so the second training returns the empty set
        ds = make_copy_dataset(rows=100)
        cl = run_pscs(ds, 1, threshold=0.05)
        assert cl.num_trainings == 2
        assert cl.num_candidates == 2
        first, second = cl.records
        assert first.used == frozenset({0})
        assert first.allowed == frozenset({0, 2})
        assert first.score == 0.0
        assert second.used == frozenset()
        assert second.allowed == frozenset({2})
        assert second.score == pytest.approx(100 * math.log(2), rel=1e-12)

    def test_family_starts_with_empty_set(self):
        for seed in range(4):
            _, lists = small_instance(seed, num_variables=5)
            for cl in lists:
                assert cl.family[0].parents == frozenset()
                assert cl.num_candidates <= cl.num_trainings

    def test_record_and_family_structure(self):
        _, lists = small_instance(1, num_variables=5)
        for cl in lists:
            pool = frozenset(range(5)) - {cl.target}
            used_sets = {rec.used for rec in cl.records}
            for rec in cl.records:
                assert rec.used <= rec.allowed <= pool
            for cand in cl.family:
                assert cand.parents in used_sets

    def test_coverage_on_synthetic(self):
        ds, lists = small_instance(3, num_variables=6, rows=200, threshold=0.01)
        for cl in lists:
            assert subset_coverage_scan(cl, 6)
            assert bq.coverage_holds(cl, 6)

    def test_resource_cap_returns_partial(self):
        ds = make_copy_dataset(rows=100)
        cl = run_pscs(ds, 1, threshold=0.05, limits=SearchLimits(max_trainings=1))
        assert not cl.complete
        assert cl.num_trainings == 1

    def test_invalid_target(self):
        ds = make_copy_dataset()
        with pytest.raises(ValueError):
            run_pscs(ds, 9, 0.1)

    def test_jobs_match_sequential(self):
        ds, _ = bq.generate_synthetic(
            bq.SyntheticSpec(num_variables=4, num_rows=200, seed=2, edge_probability=0.6)
        )
        seq = bq.run_pscs_all(ds, 0.01, jobs=1)
        par = bq.run_pscs_all(ds, 0.01, jobs=2)
        for a, b in zip(seq, par):
            assert a.records == b.records
            assert a.family == b.family


class TestLookup:
    def test_empty_set_lookup(self):
        _, lists = small_instance(0)
        for cl in lists:
            used, value = lookup_score(cl, frozenset())
            assert used == frozenset()
            assert value == cl.family[0].score

    def test_family_member_lookup_identity(self):
        _, lists = small_instance(1, num_variables=5)
        for cl in lists:
            for cand in cl.family:
                used, value = lookup_score(cl, cand.parents)
                assert used == cand.parents
                assert value == cand.score

    def test_random_subset_matches_direct_retraining(self):
        rng = random.Random(7)
        ds, lists = small_instance(2, num_variables=5, threshold=0.008)
        for cl in lists:
            pool = sorted(set(range(5)) - {cl.target})
            for _ in range(20):
                subset = frozenset(w for w in pool if rng.random() < 0.5)
                _, value = lookup_score(cl, subset)
                direct = score(train_cart(ds, cl.target, subset, cl.threshold))
                assert value == pytest.approx(direct, rel=1e-9)

    def test_memo_hit_consistency(self):
        # any span reused as a memo hit must agree with actually retraining
        rng = random.Random(3)
        ds, lists = small_instance(4, num_variables=5, threshold=0.008)
        for cl in lists:
            for rec in cl.records[:6]:
                spare = sorted(rec.allowed - rec.used)
                mid = rec.used | frozenset(w for w in spare if rng.random() < 0.5)
                tree = train_cart(ds, cl.target, mid, cl.threshold)
                assert used_variables(tree) == rec.used
                assert score(tree) == pytest.approx(rec.score, rel=1e-12)

    def test_identical_twin_variables(self):
        # y (column 0) is copied by both 1 and 2: split decreases tie exactly,
        # and spans with different used sets cover the same subsets
        import numpy as np

        rng = np.random.default_rng(3)
        base = rng.integers(0, 2, 120)
        noise = rng.integers(0, 2, 120)
        cells = np.column_stack([base, base, base, noise])
        ds = bq.Dataset(cells=cells, states=(2, 2, 2, 2), names=("y", "t1", "t2", "n"))
        cl = run_pscs(ds, 0, threshold=0.05)
        assert subset_coverage_scan(cl, 4)
        # the tie breaks to the lower-indexed twin
        assert cl.records[0].used == frozenset({1})
        # {1, 2} is spanned by a record whose core is a single twin; both
        # routes agree on the (zero) score
        used, value = lookup_score(cl, frozenset({1, 2}))
        assert value == 0.0
        assert used in (frozenset({1}), frozenset({2}))
        used2, value2 = lookup_score(cl, frozenset({2}))
        assert used2 == frozenset({2})
        assert value2 == 0.0

    def test_conflicting_spans_detected(self):
        from util import manual_candidate_list

        cl = manual_candidate_list(0, [(set(), 5.0)])
        cl.records.append(
            bq.CandidateRecord(used=frozenset(), allowed=frozenset({1}), score=5.0)
        )
        cl.records.append(
            bq.CandidateRecord(used=frozenset({1}), allowed=frozenset({1}), score=4.0)
        )
        with pytest.raises(AssertionError):
            lookup_score(cl, frozenset({1}))

    def test_partial_list_without_fallback_raises(self):
        ds = make_copy_dataset(rows=100)
        cl = run_pscs(ds, 1, threshold=0.05, limits=SearchLimits(max_trainings=1))
        with pytest.raises(IncompleteCandidatesError):
            lookup_score(cl, frozenset({2}), allow_fallback=False)
        with pytest.raises(IncompleteCandidatesError):
            lookup_score(cl, frozenset({2}), data=None)

    def test_partial_list_fallback_trains_and_memoizes(self):
        ds = make_copy_dataset(rows=100)
        cl = run_pscs(ds, 1, threshold=0.05, limits=SearchLimits(max_trainings=1))
        before = cl.num_trainings
        used, value = lookup_score(cl, frozenset({2}), data=ds)
        assert used == frozenset()
        assert value == pytest.approx(100 * math.log(2), rel=1e-12)
        assert cl.num_trainings == before + 1
        # second lookup reuses the memoized record
        again = lookup_score(cl, frozenset({2}), data=None, allow_fallback=False)
        assert again == (used, value)


class TestSerialization:
    def test_json_roundtrip(self, tmp_path):
        _, lists = small_instance(5)
        for cl in lists:
            path = tmp_path / f"var_{cl.target}.json"
            cl.save(path)
            back = bq.CandidateList.load(path)
            assert back.records == cl.records
            assert back.family == cl.family
            assert back.complete == cl.complete
            assert back.memo_hits == cl.memo_hits

    def test_efficiency_ratio_at_least_one(self):
        _, lists = small_instance(6, num_variables=6, threshold=0.01)
        for cl in lists:
            assert cl.num_trainings / cl.num_candidates >= 1.0
