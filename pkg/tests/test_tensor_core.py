"""Index-permutation planning and the labeled-tensor contraction layer."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqcsim import _kernels
from rqcsim.tensor_core import (
    Tensor,
    benchmark_csv,
    benchmark_permute,
    contract,
    permute_fast,
    permute_naive,
    plan_permutation,
)


def random_case(rng, max_rank=8, max_entries=1 << 16):
    rank = int(rng.integers(1, max_rank + 1))
    while True:
        dims = [int(rng.integers(1, 5)) for _ in range(rank)]
        if np.prod(dims) <= max_entries:
            break
    perm = list(rng.permutation(rank))
    return dims, perm


class TestPlan:
    def test_worked_example_structure(self):
        """Rank-7 equal dims, target cfeadgb, window (mu, nu) = (2, 4):
        the plan is a left move at gamma=2, a right move at gamma=4, and a
        final left move at gamma=2."""
        perm = [2, 5, 4, 0, 3, 6, 1]  # abcdefg -> cfeadgb
        plan = plan_permutation([2] * 7, perm, mu=2, nu=4)
        assert plan.move_summary() == [("L", 2), ("R", 4), ("L", 2)]
        assert plan.fallback is None

    def test_worked_example_executes_correctly(self):
        perm = [2, 5, 4, 0, 3, 6, 1]
        plan = plan_permutation([2] * 7, perm, mu=2, nu=4)
        arr = np.arange(2**7, dtype=np.complex64).reshape([2] * 7)
        out = permute_fast(arr, plan)
        assert np.array_equal(out, permute_naive(arr, perm))

    def test_identity_needs_no_moves(self):
        plan = plan_permutation([2, 2, 2], [0, 1, 2])
        assert plan.move_summary() == []

    def test_pure_left_and_right_moves(self):
        # trailing indices untouched -> single left move
        left = plan_permutation([2] * 10, [1, 0, 2, 3, 4, 5, 6, 7, 8, 9], mu=5, nu=8)
        assert [m.kind for m in left.moves] == ["L"]
        # leading indices untouched -> single right move
        right = plan_permutation([2] * 10, [0, 1, 2, 3, 4, 5, 6, 7, 9, 8], mu=5, nu=8)
        assert [m.kind for m in right.moves] == ["R"]

    def test_out_dims_follow_permutation(self):
        dims, perm = [2, 3, 4, 5], [3, 1, 0, 2]
        plan = plan_permutation(dims, perm)
        assert list(plan.out_dims) == [dims[p] for p in perm]


class TestPermuteEquivalence:
    @pytest.mark.parametrize("threads", [1, 2, 4])
    def test_randomized_byte_exact(self, threads):
        rng = np.random.default_rng(91)
        for _ in range(40):
            dims, perm = random_case(rng)
            arr = (
                rng.standard_normal(dims) + 1j * rng.standard_normal(dims)
            ).astype(np.complex64)
            plan = plan_permutation(dims, perm)
            fast = permute_fast(arr, plan, thread_count=threads)
            naive = permute_naive(arr, perm)
            assert fast.tobytes() == naive.tobytes()

    def test_complex128_also_exact(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            dims, perm = random_case(rng)
            arr = rng.standard_normal(dims) + 1j * rng.standard_normal(dims)
            plan = plan_permutation(dims, perm)
            assert permute_fast(arr, plan).tobytes() == permute_naive(
                arr, perm
            ).tobytes()

    def test_numpy_backend_matches(self):
        prev = _kernels.get_backend()
        try:
            rng = np.random.default_rng(23)
            dims, perm = [2] * 12, list(rng.permutation(12))
            arr = (
                rng.standard_normal(dims) + 1j * rng.standard_normal(dims)
            ).astype(np.complex64)
            plan = plan_permutation(dims, perm)
            _kernels.set_backend("numpy")
            via_numpy = permute_fast(arr, plan)
            if _kernels.set_backend(prev) == "numba":
                via_numba = permute_fast(arr, plan)
                assert via_numpy.tobytes() == via_numba.tobytes()
            assert via_numpy.tobytes() == permute_naive(arr, perm).tobytes()
        finally:
            _kernels.set_backend(prev)

    def test_naive_matches_numpy_transpose(self):
        rng = np.random.default_rng(5)
        dims, perm = random_case(rng)
        arr = rng.standard_normal(dims)
        assert np.array_equal(
            permute_naive(arr, perm), np.ascontiguousarray(arr.transpose(perm))
        )


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_permute_property(data):
    rank = data.draw(st.integers(1, 7))
    dims = data.draw(
        st.lists(st.integers(1, 4), min_size=rank, max_size=rank)
    )
    perm = data.draw(st.permutations(range(rank)))
    rng = np.random.default_rng(0)
    arr = (rng.standard_normal(dims) + 1j * rng.standard_normal(dims)).astype(
        np.complex64
    )
    plan = plan_permutation(dims, list(perm))
    assert permute_fast(arr, plan).tobytes() == permute_naive(arr, perm).tobytes()


class TestTensor:
    def test_labels_track_dims(self):
        arr = np.zeros((2, 3, 4))
        t = Tensor(("a", "b", "c"), arr)
        assert t.dims == (2, 3, 4)
        assert t.dim_of("b") == 3

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            Tensor(("a", "a"), np.zeros((2, 2)))

    def test_transpose_to(self):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((2, 3, 4))
        t = Tensor(("a", "b", "c"), arr).transpose_to(("c", "a", "b"))
        assert t.labels == ("c", "a", "b")
        assert np.array_equal(t.array, arr.transpose(2, 0, 1))

    def test_fix_selects_slice(self):
        rng = np.random.default_rng(1)
        arr = rng.standard_normal((2, 3))
        t = Tensor(("a", "b"), arr).fix("a", 1)
        assert t.labels == ("b",)
        assert np.array_equal(t.array, arr[1])

    def test_fix_to_scalar(self):
        t = Tensor(("a", "b"), np.array([[1.0, 2.0], [3.0, 4.0]]))
        s = t.fix("a", 0).fix("b", 1)
        assert s.labels == ()
        assert s.scalar() == 2.0

    def test_relabel(self):
        t = Tensor(("a", "b"), np.zeros((2, 2))).relabel({"a": "x"})
        assert t.labels == ("x", "b")


class TestContract:
    def test_matches_einsum_on_shared_labels(self):
        rng = np.random.default_rng(3)
        a = Tensor(
            ("i", "j", "k"),
            (rng.standard_normal((4, 3, 2)) + 1j * rng.standard_normal((4, 3, 2))
             ).astype(np.complex64),
        )
        b = Tensor(
            ("j", "k", "m"),
            (rng.standard_normal((3, 2, 5)) + 1j * rng.standard_normal((3, 2, 5))
             ).astype(np.complex64),
        )
        out = contract(a, b)
        ref = np.einsum("ijk,jkm->im", a.array, b.array)
        assert set(out.labels) == {"i", "m"}
        got = out.transpose_to(("i", "m")).array
        assert np.allclose(got, ref, rtol=1e-5, atol=1e-6)

    def test_outer_product_when_no_shared_labels(self):
        a = Tensor(("x",), np.array([1.0, 2.0], dtype=np.complex64))
        b = Tensor(("y",), np.array([3.0, 5.0], dtype=np.complex64))
        out = contract(a, b).transpose_to(("x", "y"))
        assert np.allclose(out.array, np.array([[3, 5], [6, 10]]))

    def test_full_contraction_to_scalar(self):
        rng = np.random.default_rng(4)
        v = rng.standard_normal(8).astype(np.complex64)
        w = rng.standard_normal(8).astype(np.complex64)
        a, b = Tensor(("x",), v), Tensor(("x",), w)
        assert np.isclose(contract(a, b).scalar(), np.dot(v, w), rtol=1e-5)

    def test_mismatched_shared_dims_rejected(self):
        a = Tensor(("i", "j"), np.zeros((2, 3)))
        b = Tensor(("j", "k"), np.zeros((4, 2)))
        with pytest.raises(ValueError):
            contract(a, b)


class TestBenchmark:
    def test_row_schema_and_ops(self):
        rows = benchmark_permute(rank=12, gammas=(5, 6), repeats=3)
        assert {r["op"] for r in rows} == {"lmove", "rmove", "naive"}
        for r in rows:
            assert r["rank"] == 12
            assert r["gamma"] in (5, 6)
            assert r["median_ns"] > 0
            assert r["p10_ns"] <= r["median_ns"] <= r["p90_ns"]

    def test_csv_has_header_and_rows(self):
        rows = benchmark_permute(rank=10, gammas=(5,), repeats=2)
        text = benchmark_csv(rows)
        lines = text.strip().splitlines()
        assert lines[0].startswith("op,")
        assert len(lines) == len(rows) + 1

    def test_compare_backends_adds_suffixed_ops(self):
        rows = benchmark_permute(
            rank=10, gammas=(5,), repeats=2, compare_backends=True
        )
        ops = {r["op"] for r in rows}
        assert any(op.endswith("/numpy") for op in ops)
