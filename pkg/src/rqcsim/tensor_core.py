"""Cache-aware tensor index permutation and pairwise contraction.

Transposing a large row-major tensor with numpy's strided copy touches
memory all over the place.  Here every permutation is decomposed into at
most three *moves* that keep memory traffic sequential:

* **L move** -- permutes only the leading indexes, leaving a trailing
  group of gamma indexes untouched.  Data moves as whole contiguous
  blocks of size prod(trailing dims), which should be at least 2**mu
  entries to amortize the random block placement.
* **R move** -- permutes only the trailing gamma indexes.  Data is
  reordered *within* each contiguous block, which should fit in fast
  cache: at most 2**nu entries.

Any permutation factors as L-R-L for reasonable (mu, nu); most factor
shorter.  The gather maps are exponentially smaller than the tensor
(2^(k-gamma) or 2^gamma entries instead of 2^k), so they are memoized.
Pairwise contraction permutes both operands into matrix layout with
these moves and hands the rest to BLAS.
"""

from __future__ import annotations

import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Move:
    """One permutation pass over the flat tensor.

    ``group_perm`` permutes the affected index group in gather order
    (new position j holds what was at group position group_perm[j]).
    ``gamma`` counts trailing indexes: the untouched suffix for an L
    move, the reordered suffix for an R move.
    """

    kind: str
    group_perm: tuple[int, ...]
    gamma: int

    def __post_init__(self):
        if self.kind not in ("L", "R"):
            raise ValueError(f"move kind must be 'L' or 'R', got {self.kind!r}")


@dataclass(frozen=True)
class PermutePlan:
    dims: tuple[int, ...]
    perm: tuple[int, ...]
    moves: tuple[Move, ...]
    mu: int
    nu: int
    fallback: Optional[str] = None  # set when no valid move decomposition exists

    @property
    def out_dims(self) -> tuple[int, ...]:
        return tuple(self.dims[p] for p in self.perm)

    def move_summary(self) -> list[tuple[str, int]]:
        """[(kind, gamma), ...] -- e.g. [('L', 2), ('R', 4), ('L', 2)]."""
        return [(m.kind, m.gamma) for m in self.moves]


def _is_identity(perm: Sequence[int]) -> bool:
    return all(p == i for i, p in enumerate(perm))


def plan_permutation(dims: Sequence[int], perm: Sequence[int],
                     mu: int = 5, nu: int = 10) -> PermutePlan:
    """Decompose a transpose into L/R moves (identity, single, L-R, or L-R-L).

    The trailing block untouched by each L move must hold at least 2**mu
    entries; the window reordered by each R move at most 2**nu.  If the
    permutation admits no such decomposition the plan degrades to a naive
    strided transpose and says so in ``fallback``.
    """
    dims = tuple(int(d) for d in dims)
    perm = tuple(int(p) for p in perm)
    k = len(dims)
    if sorted(perm) != list(range(k)):
        raise ValueError(f"perm {perm} is not a permutation of 0..{k - 1}")
    if mu < 0 or nu < mu:
        raise ValueError(f"need 0 <= mu <= nu, got mu={mu}, nu={nu}")
    if any(d < 1 for d in dims):
        raise ValueError("dims must be positive")

    min_block = 1 << mu
    max_window = 1 << nu

    def suffix_size(axes: Sequence[int], g: int) -> int:
        return math.prod(dims[a] for a in axes[len(axes) - g:]) if g else 1

    ident = tuple(range(k))
    if perm == ident:
        return PermutePlan(dims, perm, (), mu, nu)

    # fixed suffix -> single L move
    g_fix = 0
    while g_fix < k and perm[k - 1 - g_fix] == k - 1 - g_fix:
        g_fix += 1
    if g_fix >= 1 and suffix_size(ident, g_fix) >= min_block:
        mv = Move("L", perm[:k - g_fix], g_fix)
        return PermutePlan(dims, perm, (mv,), mu, nu)

    # fixed prefix -> single R move
    g_pre = 0
    while g_pre < k and perm[g_pre] == g_pre:
        g_pre += 1
    if suffix_size(ident, k - g_pre) <= max_window:
        mv = Move("R", tuple(p - g_pre for p in perm[g_pre:]), k - g_pre)
        return PermutePlan(dims, perm, (mv,), mu, nu)

    # prefix block maps to itself -> one L on the block, one R on the rest
    best_split = None
    running_max = -1
    for b in range(1, k):
        running_max = max(running_max, perm[b - 1])
        if running_max == b - 1:
            w = suffix_size(ident, k - b)
            if min_block <= w <= max_window:
                best_split = b  # keep the largest such b: smallest R window
    if best_split is not None:
        b = best_split
        moves = []
        if not _is_identity(perm[:b]):
            moves.append(Move("L", perm[:b], k - b))
        tail = tuple(p - b for p in perm[b:])
        if not _is_identity(tail):
            moves.append(Move("R", tail, k - b))
        return PermutePlan(dims, perm, tuple(moves), mu, nu)

    # general three-move template: L brings the strays next to the window,
    # R settles the final suffix, L fixes the prefix.
    plan = _plan_three_moves(dims, perm, mu, nu)
    if plan is not None:
        return plan

    return PermutePlan(dims, perm, (), mu, nu, fallback="naive")


def _plan_three_moves(dims, perm, mu, nu) -> Optional[PermutePlan]:
    k = len(dims)
    min_block = 1 << mu
    max_window = 1 << nu
    pos_in_perm = {axis: j for j, axis in enumerate(perm)}

    gamma_l = None
    for g in range(1, k):
        in_size = math.prod(dims[k - g:])
        out_size = math.prod(dims[p] for p in perm[k - g:])
        if in_size >= min_block and out_size >= min_block:
            gamma_l = g
            break
    if gamma_l is None:
        return None

    suffix = list(perm[k - gamma_l:])  # axes that must end up trailing, in order
    suffix_set = set(suffix)
    movers = [a for a in suffix if a < k - gamma_l]
    nonmovers = sorted((a for a in range(k - gamma_l) if a not in suffix_set),
                       key=pos_in_perm.get)
    arranged = nonmovers + movers
    layout1 = arranged + list(range(k - gamma_l, k))

    # widest window within the nu budget that still spans all of `suffix`
    gamma_r = None
    for g in range(k, gamma_l + len(movers) - 1, -1):
        if math.prod(dims[a] for a in layout1[k - g:]) <= max_window:
            gamma_r = g
            break
    if gamma_r is None or gamma_r < gamma_l + len(movers):
        return None

    moves = []
    if not _is_identity(arranged):
        moves.append(Move("L", tuple(arranged), gamma_l))

    window = layout1[k - gamma_r:]
    leftover = sorted((a for a in window if a not in suffix_set), key=pos_in_perm.get)
    new_window = leftover + suffix
    r_local = tuple(window.index(a) for a in new_window)
    if not _is_identity(r_local):
        moves.append(Move("R", r_local, gamma_r))
    layout2 = layout1[:k - gamma_r] + new_window

    first_target = list(perm[:k - gamma_l])
    cur_first = layout2[:k - gamma_l]
    l2_local = tuple(cur_first.index(a) for a in first_target)
    if not _is_identity(l2_local):
        moves.append(Move("L", l2_local, gamma_l))

    assert first_target + layout2[k - gamma_l:] == list(perm)
    return PermutePlan(dims, perm, tuple(moves), mu, nu)


# ---------------------------------------------------------------------------
# Move-map memoization
# ---------------------------------------------------------------------------


class MoveMapCache:
    """LRU cache of gather maps, keyed by (group dims, group perm).

    Maps cover only the permuted index group, so they are tiny compared
    to the tensors they rearrange and get reused across every path of a
    contraction.
    """

    def __init__(self, max_entries: int = 512):
        self.max_entries = max_entries
        self._maps: OrderedDict[tuple, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, group_dims: tuple[int, ...], group_perm: tuple[int, ...]) -> np.ndarray:
        key = (group_dims, group_perm)
        cached = self._maps.get(key)
        if cached is not None:
            self._maps.move_to_end(key)
            self.hits += 1
            return cached
        self.misses += 1
        src = np.arange(math.prod(group_dims), dtype=np.int64).reshape(group_dims)
        gmap = np.ascontiguousarray(np.transpose(src, group_perm)).ravel()
        self._maps[key] = gmap
        while len(self._maps) > self.max_entries:
            self._maps.popitem(last=False)
        return gmap

    def clear(self):
        self._maps.clear()
        self.hits = self.misses = 0


_MAP_CACHE = MoveMapCache()

# plans are pure functions of (dims, perm, mu, nu); planning in python is
# too slow to redo inside per-path loops
_PLAN_CACHE: dict[tuple, PermutePlan] = {}


def planned(dims: Sequence[int], perm: Sequence[int], mu: int = 5, nu: int = 10) -> PermutePlan:
    key = (tuple(dims), tuple(perm), mu, nu)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = plan_permutation(dims, perm, mu, nu)
        if len(_PLAN_CACHE) > 8192:
            _PLAN_CACHE.clear()
        _PLAN_CACHE[key] = plan
    return plan


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def permute_naive(array: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Reference transpose: numpy strided copy into fresh row-major storage."""
    return np.ascontiguousarray(np.transpose(array, tuple(perm)))


class Workspace:
    """A pair of reusable flat buffers per (size, dtype), for move ping-pong."""

    def __init__(self):
        self._bufs: dict[tuple, list] = {}

    def take(self, size: int, dtype, slot: int) -> np.ndarray:
        key = (size, np.dtype(dtype))
        pair = self._bufs.setdefault(key, [None, None])
        if pair[slot] is None:
            pair[slot] = np.empty(size, dtype=dtype)
        return pair[slot]


def permute_fast(array: np.ndarray, plan: PermutePlan, thread_count: int = 1,
                 workspace: Optional[Workspace] = None,
                 map_cache: Optional[MoveMapCache] = None) -> np.ndarray:
    """Apply a move plan; returns a row-major array with permuted indexes.

    With no data movement needed the input is returned as-is.  When a
    workspace is supplied the result aliases one of its buffers and is
    only valid until the next call that reuses it.
    """
    a = np.ascontiguousarray(array).reshape(plan.dims)
    if plan.fallback is not None:
        return permute_naive(a, plan.perm)
    if not plan.moves:
        return a

    cache = map_cache if map_cache is not None else _MAP_CACHE
    ws = workspace if workspace is not None else Workspace()
    cur = a.reshape(-1)
    cur_dims = list(plan.dims)
    for i, mv in enumerate(plan.moves):
        k = len(cur_dims)
        dst = ws.take(cur.size, cur.dtype, i & 1)
        if mv.kind == "L":
            g = k - mv.gamma
            group_dims = tuple(cur_dims[:g])
            row_map = cache.get(group_dims, mv.group_perm)
            d_gamma = math.prod(cur_dims[g:])
            _kernels.l_move(cur, dst, row_map, d_gamma, thread_count)
            cur_dims[:g] = [group_dims[p] for p in mv.group_perm]
        else:
            g = k - mv.gamma
            group_dims = tuple(cur_dims[g:])
            col_map = cache.get(group_dims, mv.group_perm)
            d_gamma = math.prod(group_dims)
            _kernels.r_move(cur, dst, col_map, d_gamma, cur.size // d_gamma,
                            thread_count)
            cur_dims[g:] = [group_dims[p] for p in mv.group_perm]
        cur = dst
    out = cur.reshape(cur_dims)
    assert tuple(cur_dims) == plan.out_dims
    return out


# ---------------------------------------------------------------------------
# Labeled tensors and contraction
# ---------------------------------------------------------------------------


class Tensor:
    """A row-major ndarray with one string label per index."""

    __slots__ = ("labels", "array")

    def __init__(self, labels: Sequence[str], array: np.ndarray):
        labels = tuple(labels)
        if array.ndim != len(labels):
            raise ValueError(f"{array.ndim}-d array with {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels: {labels}")
        self.labels = labels
        self.array = array

    @property
    def dims(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def size(self) -> int:
        return self.array.size

    def dim_of(self, label: str) -> int:
        return self.array.shape[self.labels.index(label)]

    def relabel(self, mapping: dict) -> "Tensor":
        return Tensor(tuple(mapping.get(l, l) for l in self.labels), self.array)

    def fix(self, label: str, value: int) -> "Tensor":
        """Slice one index to a fixed value, dropping it."""
        axis = self.labels.index(label)
        sliced = np.take(self.array, value, axis=axis)
        if sliced.ndim:  # ascontiguousarray would promote 0-d to 1-d
            sliced = np.ascontiguousarray(sliced)
        return Tensor(self.labels[:axis] + self.labels[axis + 1:], sliced)

    def transpose_to(self, labels: Sequence[str], thread_count: int = 1) -> "Tensor":
        labels = tuple(labels)
        if labels == self.labels:
            return self
        perm = tuple(self.labels.index(l) for l in labels)
        plan = planned(self.array.shape, perm)
        return Tensor(labels, permute_fast(self.array, plan, thread_count))

    def scalar(self) -> complex:
        if self.labels:
            raise ValueError(f"tensor still has indexes {self.labels}")
        return complex(self.array[()])

    def __repr__(self):
        return f"Tensor({self.labels}, shape={self.array.shape}, dtype={self.array.dtype})"


def contract(a: Tensor, b: Tensor, thread_count: int = 1,
             mu: int = 5, nu: int = 10) -> Tensor:
    """Contract two tensors over all shared labels.

    Both operands are permuted into matrix layout with planned L/R moves
    and multiplied with one BLAS call; free labels keep their original
    relative order (a's first, then b's).
    """
    b_set = set(b.labels)
    shared = [l for l in a.labels if l in b_set]
    a_free = [l for l in a.labels if l not in b_set]
    a_set = set(a.labels)
    b_free = [l for l in b.labels if l not in a_set]

    for l in shared:
        if a.dim_of(l) != b.dim_of(l):
            raise ValueError(f"dimension mismatch on {l!r}: {a.dim_of(l)} vs {b.dim_of(l)}")

    perm_a = tuple(a.labels.index(l) for l in a_free + shared)
    perm_b = tuple(b.labels.index(l) for l in shared + b_free)
    arr_a = permute_fast(a.array, planned(a.array.shape, perm_a, mu, nu), thread_count)
    arr_b = permute_fast(b.array, planned(b.array.shape, perm_b, mu, nu), thread_count)

    m = math.prod(arr_a.shape[:len(a_free)])
    ksz = arr_a.size // m
    n = arr_b.size // ksz
    out = arr_a.reshape(m, ksz) @ arr_b.reshape(ksz, n)
    out_dims = tuple(arr_a.shape[:len(a_free)]) + tuple(arr_b.shape[len(shared):])
    return Tensor(tuple(a_free + b_free), out.reshape(out_dims))


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


def _time_ns(fn, repeats: int) -> tuple[float, float, float]:
    fn()  # warm caches / JIT before sampling
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    arr = np.array(samples, dtype=np.float64)
    return (float(np.median(arr)), float(np.percentile(arr, 10)),
            float(np.percentile(arr, 90)))


def _random_perm(rng, k: int, fix_prefix: int = 0, fix_suffix: int = 0) -> tuple[int, ...]:
    """Random non-identity permutation fixing the given prefix/suffix."""
    body = list(range(fix_prefix, k - fix_suffix))
    while True:
        mixed = [int(v) for v in rng.permutation(body)]
        if mixed != body:
            return tuple(range(fix_prefix)) + tuple(mixed) + tuple(range(k - fix_suffix, k))


def benchmark_permute(rank: int = 20,
                      gammas: Iterable[int] = range(5, 11),
                      thread_counts: Iterable[int] = (1,),
                      repeats: int = 7,
                      dtype=np.complex64,
                      compare_backends: bool = False,
                      seed: int = 0) -> list[dict]:
    """Time single L/R moves against a naive arbitrary-permutation reordering.

    Per gamma, three reorderings of a rank-``rank`` binary tensor are timed:
    an arbitrary L move (random permutation of the leading indexes, trailing
    gamma fixed), an arbitrary R move (random permutation of the trailing
    gamma), and a naive strided transpose of an arbitrary permutation of all
    indexes -- the baseline each move pass replaces.  Returns rows with keys
    (op, rank, gamma, threads, median_ns, p10_ns, p90_ns).  With
    ``compare_backends`` both kernel backends are timed and the op name
    carries a ``/numba`` or ``/numpy`` suffix.
    """
    dims = (2,) * rank
    rng = np.random.Generator(np.random.PCG64(seed))
    x = (rng.standard_normal(1 << rank) + 1j * rng.standard_normal(1 << rank))
    x = x.astype(dtype).reshape(dims)

    backends = [_kernels.get_backend()]
    if compare_backends:
        backends = [b for b in ("numba", "numpy")
                    if (b == "numba" and _kernels._HAVE_NUMBA) or b == "numpy"]

    rows = []
    ws = Workspace()
    for gamma in gammas:
        perm_l = _random_perm(rng, rank, fix_suffix=gamma)
        perm_r = _random_perm(rng, rank, fix_prefix=rank - gamma)
        for name, perm in (("lmove", perm_l), ("rmove", perm_r)):
            plan = plan_permutation(dims, perm, mu=min(5, gamma), nu=max(10, gamma))
            kinds = [m.kind for m in plan.moves]
            assert kinds == (["L"] if name == "lmove" else ["R"]), (name, plan.move_summary())
            for threads in thread_counts:
                for backend in backends:
                    prev = _kernels.set_backend(backend)
                    try:
                        med, p10, p90 = _time_ns(
                            lambda: permute_fast(x, plan, threads, workspace=ws),
                            repeats)
                    finally:
                        _kernels.set_backend(prev)
                    op = f"{name}/{backend}" if compare_backends else name
                    rows.append({"op": op, "rank": rank, "gamma": gamma,
                                 "threads": threads, "median_ns": med,
                                 "p10_ns": p10, "p90_ns": p90})
        # one full arbitrary permutation per gamma: the green baseline line
        perm_full = _random_perm(rng, rank)
        med, p10, p90 = _time_ns(lambda: permute_naive(x, perm_full), repeats)
        rows.append({"op": "naive", "rank": rank, "gamma": gamma, "threads": 1,
                     "median_ns": med, "p10_ns": p10, "p90_ns": p90})
    return rows


def benchmark_csv(rows: list[dict]) -> str:
    header = ["op", "rank", "gamma", "threads", "median_ns", "p10_ns", "p90_ns"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[h]) for h in header))
    return "\n".join(lines) + "\n"
