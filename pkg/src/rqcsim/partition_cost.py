"""Qubit-complexity model for partition-based simulation of a lattice.

A partition-style simulator splits the lattice into sub-circuits, evolves
each part as a dense wave function, and sums over one path per value
assignment of every cut two-qubit gate.  Each cut CZ doubles the path
count, and each part costs 2^(its qubit count) per path, so the whole
computation collapses to a closed-form "qubit complexity" — the log2 of
the total amplitude-evaluation cost:

    two parts:    alpha_AB + log2(2^n_A + 2^n_B)
    three parts:  alpha_AB + alpha_AC
                    + log2[2^n_A + 2^alpha_BC * (2^n_B + 2^n_C)]
    four parts:   alpha_AB + alpha_CD
                    + log2[2^alpha_BC * (2^n_B + 2^n_C)
                           + 2^alpha_AD * (2^n_A + 2^n_D)]

where alpha_XY counts the two-qubit gates crossing between parts X and Y
over the whole circuit.  The three-part form fixes A as the largest part
(it is re-simulated least often); the four-part form requires ring
topology, i.e. no gates between the diagonal pairs A-C and B-D.

Candidate partitions come from geometric families, not exhaustive search:
straight bisections (row, column, or diagonal lines at the most balanced
offsets), three-part schemes that additionally carve d = 1..5 diagonal
bands off the top-right corner, and four-part centered crosses.  The
families are deliberately balance-restricted — the formula alone would
favor slicing off a single corner qubit, leaving a near-full-size part
whose wave function could never be stored.

Cross-gate counts are always measured on a generated circuit (the
two-qubit layout depends only on lattice and depth, not on the seed),
never entered by hand.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .circuits import Circuit, DepthSpec, Lattice, cross_gate_count, generate_rqc

__all__ = [
    "PartitionSpec", "partition_spec", "qubit_complexity", "best_partition",
    "bipartition_candidates", "tripartition_candidates", "quad_candidates",
    "complexity_table", "table_csv", "SCHEMES",
]

SCHEMES = ("bi", "tri", "quad")


def _pairs(arity: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(arity), 2))


@dataclass(frozen=True)
class PartitionSpec:
    """A split of the sites into 2-4 parts with measured cross-gate counts.

    ``cross_counts`` holds alpha_XY for the part pairs in lexicographic
    order — (0,1) for two parts; (0,1), (0,2), (1,2) for three; and so on.
    ``d`` records the diagonal offset for three-part corner schemes.
    """

    parts: tuple[frozenset, ...]
    cross_counts: tuple[int, ...]
    d: Optional[int] = None
    label: str = ""

    def __post_init__(self):
        if not 2 <= len(self.parts) <= 4:
            raise ValueError(f"need 2-4 parts, got {len(self.parts)}")
        for i, p in enumerate(self.parts):
            if not p:
                raise ValueError(f"part {i} is empty")
        union = set()
        for p in self.parts:
            if union & p:
                raise ValueError("parts overlap")
            union |= p
        if len(self.cross_counts) != len(_pairs(len(self.parts))):
            raise ValueError(
                f"{len(self.parts)} parts need {len(_pairs(len(self.parts)))} "
                f"cross counts, got {len(self.cross_counts)}")
        if any(a < 0 for a in self.cross_counts):
            raise ValueError("cross-gate counts must be nonnegative")

    @property
    def arity(self) -> int:
        return len(self.parts)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.parts)

    def alpha(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return self.cross_counts[_pairs(self.arity).index((i, j))]


def partition_spec(circuit: Circuit, parts: Sequence, *, d: Optional[int] = None,
                   label: str = "") -> PartitionSpec:
    """Measure cross-gate counts of a partition on an actual circuit."""
    sets = tuple(frozenset(p) for p in parts)
    covered = set()
    for p in sets:
        covered |= p
    if covered != set(range(circuit.n)):
        raise ValueError("parts must cover every site exactly once")
    cross = tuple(cross_gate_count(circuit, sets[i], sets[j])
                  for i, j in _pairs(len(sets)))
    return PartitionSpec(sets, cross, d=d, label=label)


def qubit_complexity(spec: PartitionSpec) -> float:
    """log2 of the total amplitude-evaluation cost of the partition."""
    ns = spec.sizes
    if spec.arity == 2:
        return spec.alpha(0, 1) + math.log2(2 ** ns[0] + 2 ** ns[1])
    if spec.arity == 3:
        # relabel so A is the largest part; the formula is B<->C symmetric
        a = max(range(3), key=lambda i: ns[i])
        b, c = [i for i in range(3) if i != a]
        inner = 2 ** ns[a] + 2 ** spec.alpha(b, c) * (2 ** ns[b] + 2 ** ns[c])
        return spec.alpha(a, b) + spec.alpha(a, c) + math.log2(inner)
    # four parts: ring A-B-C-D-A, no diagonal gates allowed
    if spec.alpha(0, 2) or spec.alpha(1, 3):
        raise ValueError("four-part cost needs ring topology: diagonal pairs "
                         "A-C and B-D must share no gates")
    inner = (2 ** spec.alpha(1, 2) * (2 ** ns[1] + 2 ** ns[2])
             + 2 ** spec.alpha(0, 3) * (2 ** ns[0] + 2 ** ns[3]))
    return spec.alpha(0, 1) + spec.alpha(2, 3) + math.log2(inner)


# ---------------------------------------------------------------------------
# Geometric candidate families.
# ---------------------------------------------------------------------------

_DIRECTIONS = {
    "row": lambda rc: rc[0],
    "col": lambda rc: rc[1],
    "diag": lambda rc: rc[0] + rc[1],
    "anti": lambda rc: rc[0] - rc[1],
}


def _balanced_offsets(lattice: Lattice, key) -> list:
    """Cut offsets along one direction minimizing |n_A - n_B|."""
    values = sorted({key(lattice.coords(s)) for s in range(lattice.n)})
    scored = []
    for k in values[:-1]:
        n_low = sum(1 for s in range(lattice.n) if key(lattice.coords(s)) <= k)
        scored.append((abs(2 * n_low - lattice.n), k))
    best = min(s[0] for s in scored)
    return [k for score, k in scored if score == best]


def _balanced_lines(lattice: Lattice) -> list[tuple[str, frozenset]]:
    """(label, low-side sites) for every direction's most balanced cuts."""
    out = []
    for name, key in _DIRECTIONS.items():
        for k in _balanced_offsets(lattice, key):
            low = frozenset(s for s in range(lattice.n)
                            if key(lattice.coords(s)) <= k)
            out.append((f"{name}<={k}", low))
    return out


def bipartition_candidates(lattice: Lattice) -> Iterator[tuple[str, tuple]]:
    """Straight bisections: most balanced line in each direction."""
    everything = frozenset(range(lattice.n))
    for label, low in _balanced_lines(lattice):
        yield label, (low, everything - low)


def tripartition_candidates(lattice: Lattice,
                            d: int) -> Iterator[tuple[str, tuple]]:
    """A bisection line plus d diagonal bands carved off the top-right.

    The corner region is the d outermost anti-diagonal bands (largest
    col - row); larger d moves the diagonal cut further from the corner.
    """
    if not 1 <= d <= 5:
        raise ValueError(f"diagonal offset d={d} must be in 1..5")
    v_max = max(c - r for r, c in lattice.sites)
    corner = frozenset(s for s in range(lattice.n)
                       if lattice.coords(s)[1] - lattice.coords(s)[0]
                       >= v_max - (d - 1))
    rest = frozenset(range(lattice.n)) - corner
    for label, low in _balanced_lines(lattice):
        a, b = low & rest, rest - low
        if a and b and corner:
            yield f"d={d},{label}", (a, b, corner)


def quad_candidates(lattice: Lattice) -> Iterator[tuple[str, tuple]]:
    """Centered crosses: a balanced row line times a balanced column line.

    Quadrants are ordered around the ring (top-left, top-right,
    bottom-right, bottom-left), so only neighboring parts share gates.
    """
    row_ks = _balanced_offsets(lattice, _DIRECTIONS["row"])
    col_ks = _balanced_offsets(lattice, _DIRECTIONS["col"])
    for r0 in row_ks:
        for c0 in col_ks:
            quads = [[], [], [], []]
            for s in range(lattice.n):
                r, c = lattice.coords(s)
                bottom = r > r0
                right = c > c0
                quads[2 * bottom + (right != bottom)].append(s)
            parts = tuple(frozenset(q) for q in quads)
            if all(parts):
                yield f"row<={r0},col<={c0}", parts


def _scheme_candidates(lattice: Lattice, scheme: str):
    if scheme == "bi":
        yield from ((lab, parts, None)
                    for lab, parts in bipartition_candidates(lattice))
    elif scheme == "quad":
        yield from ((lab, parts, None)
                    for lab, parts in quad_candidates(lattice))
    elif scheme == "tri":
        for d in range(1, 6):
            yield from ((lab, parts, d)
                        for lab, parts in tripartition_candidates(lattice, d))
    elif scheme.startswith("tri:"):
        d = int(scheme.split(":", 1)[1])
        yield from ((lab, parts, d)
                    for lab, parts in tripartition_candidates(lattice, d))
    else:
        raise ValueError(f"unsupported scheme {scheme!r}; "
                         f"use bi, tri, tri:<d>, or quad")


def best_partition(lattice: Lattice, depth, scheme: str) \
        -> tuple[PartitionSpec, float]:
    """Minimum-cost partition within one geometric family.

    The cross-gate counts are measured on a generated circuit; the
    two-qubit layout is seed-independent, so seed 0 is representative.
    """
    depth = DepthSpec.parse(depth)
    circuit = generate_rqc(lattice, depth, seed=0)
    best = None
    for label, parts, d in _scheme_candidates(lattice, scheme):
        spec = partition_spec(circuit, parts, d=d, label=label)
        cost = qubit_complexity(spec)
        if best is None or cost < best[1]:
            best = (spec, cost)
    if best is None:
        raise ValueError(f"no valid {scheme!r} partitions for {lattice.kind}")
    return best


def complexity_table(lattice: Lattice, depth,
                     schemes: Sequence[str] = SCHEMES) \
        -> list[tuple[str, str, float]]:
    """(scheme, params, cost_log2) rows, every candidate in every scheme."""
    depth = DepthSpec.parse(depth)
    circuit = generate_rqc(lattice, depth, seed=0)
    rows = []
    for scheme in schemes:
        for label, parts, d in _scheme_candidates(lattice, scheme):
            spec = partition_spec(circuit, parts, d=d, label=label)
            base = scheme.split(":", 1)[0]
            rows.append((base, label, qubit_complexity(spec)))
    return rows


def table_csv(rows: Sequence[tuple[str, str, float]]) -> str:
    lines = ["scheme,params,cost_log2"]
    lines += [f"{scheme},\"{params}\",{cost:.6g}" for scheme, params, cost in rows]
    return "\n".join(lines) + "\n"
