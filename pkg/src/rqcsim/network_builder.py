"""Build the circuit's tensor network and contract it down to the grid.

The network is assembled in two stages.  ``build_3d`` makes one small
block tensor per qubit per 8-cycle window: single-qubit gates multiply
into the block along its time index, while each two-qubit gate leaves a
dimension-2 bond index shared with the neighbor's block (two-qubit gates
enter in rank-revealing factored form, so a CZ costs one binary index
instead of a dense 4x4 link).  Input/output basis states fold into the
first/last blocks; selected outputs may stay open.

``contract_time`` then collapses each qubit's blocks along time and
merges the per-window bonds of every lattice edge into a single index of
dimension 2^(number of activations), yielding one tensor per site -- a
2D network shaped like the lattice, ready for the contraction planner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuits import Circuit, Lattice
from .tensor_core import Tensor, contract

# Gate matrices, U[out, in].  (The reference simulator keeps its own copies;
# the duplication is deliberate so the two pipelines stay independent.)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
_T = np.diag([1.0, np.exp(1j * np.pi / 4)]).astype(np.complex128)
_X_1_2 = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=np.complex128)
_Y_1_2 = 0.5 * np.array([[1 + 1j, -1 - 1j], [1 + 1j, 1 + 1j]], dtype=np.complex128)

_GATE_1Q = {"h": _H, "t": _T, "x_1_2": _X_1_2, "y_1_2": _Y_1_2}

# Factored two-qubit gates: a pair of g[b, in, out] arrays, one per endpoint,
# with sum_b ga[b,i1,o1]*gb[b,i2,o2] equal to the 4x4 gate element
# <o1 o2|U|i1 i2>.  The bond runs over the gate's Schmidt rank.
_CZ_A = np.zeros((2, 2, 2), dtype=np.complex128)
_CZ_A[0, 0, 0] = 1.0
_CZ_A[1, 1, 1] = 1.0
_CZ_B = np.zeros((2, 2, 2), dtype=np.complex128)
_CZ_B[0] = np.eye(2)
_CZ_B[1] = np.diag([1.0, -1.0])

_ISWAP_A = np.zeros((4, 2, 2), dtype=np.complex128)
_ISWAP_A[0, 0, 0] = 1.0
_ISWAP_A[1, 1, 1] = 1.0
_ISWAP_A[2, 0, 1] = 1.0  # |1><0|
_ISWAP_A[3, 1, 0] = 1.0  # |0><1|
_ISWAP_B = np.zeros((4, 2, 2), dtype=np.complex128)
_ISWAP_B[0, 0, 0] = 1.0
_ISWAP_B[1, 1, 1] = 1.0
_ISWAP_B[2, 1, 0] = 1j  # i|0><1|
_ISWAP_B[3, 0, 1] = 1j  # i|1><0|

_GATE_2Q = {"cz": (_CZ_A, _CZ_B), "iswap": (_ISWAP_A, _ISWAP_B)}


def gate_tensor(name: str):
    """Tensor form of a gate.

    Single-qubit gates return a (2, 2) matrix U[out, in].  Two-qubit gates
    return a pair of (rank, 2, 2) factors g[bond, in, out], lower site id
    first, whose bond contraction rebuilds the 4x4 matrix.
    """
    if name in _GATE_1Q:
        return _GATE_1Q[name]
    if name in _GATE_2Q:
        return _GATE_2Q[name]
    raise ValueError(f"unknown gate {name!r}")


WINDOW = 8


def time_bond(q: int, w: int) -> str:
    return f"t{q}w{w}"


def window_bond(w: int, a: int, b: int) -> str:
    return f"b{w}_{a}_{b}"


def edge_label(a: int, b: int) -> str:
    a, b = min(a, b), max(a, b)
    return f"e{a}_{b}"


def out_label(q: int) -> str:
    return f"out{q}"


def _as_bits(value, n: int) -> str:
    if isinstance(value, str):
        s = value.strip()
        if len(s) != n or set(s) - {"0", "1"}:
            raise ValueError(f"bit-string must be {n} chars of 0/1, got {value!r}")
        return s
    return format(int(value), f"0{n}b")


@dataclass
class Net3D:
    """Per-qubit stacks of window block tensors."""

    circuit: Circuit
    blocks: dict[int, list[Tensor]]
    windows: int
    in_bits: str
    out_bits: Optional[str]
    open_sites: tuple[int, ...]
    dtype: np.dtype


@dataclass
class Net2D:
    """One tensor per lattice site; bonds carry the merged circuit history."""

    circuit: Circuit
    tensors: dict[int, Tensor]
    bond_dim: dict[tuple[int, int], int]
    in_bits: str
    out_bits: Optional[str]
    open_sites: tuple[int, ...]

    def owner_of(self, label: str) -> int:
        for site, t in self.tensors.items():
            if label in t.labels:
                return site
        raise KeyError(label)

    def fix_outputs(self, bits: dict[int, int]) -> "Net2D":
        """New network with the given open outputs sliced to fixed bits."""
        tensors = dict(self.tensors)
        for q, bit in bits.items():
            owner = None
            lbl = out_label(q)
            for site, t in tensors.items():
                if lbl in t.labels:
                    owner = site
                    break
            if owner is None:
                raise KeyError(f"site {q} has no open output")
            tensors[owner] = tensors[owner].fix(lbl, int(bit))
        remaining = tuple(q for q in self.open_sites if q not in bits)
        return Net2D(self.circuit, tensors, self.bond_dim, self.in_bits,
                     self.out_bits, remaining)


def build_3d(circuit: Circuit, in_bits=0, out_bits=None,
             open_sites: Iterable[int] = (), dtype=np.complex64) -> Net3D:
    """Assemble per-qubit window blocks for fixed input bits.

    ``out_bits=None`` leaves every output open (an index of dimension 2 per
    qubit); otherwise outputs fold in, except for sites listed in
    ``open_sites`` which stay open regardless.
    """
    n = circuit.n
    t = circuit.depth.t
    in_s = _as_bits(in_bits, n)
    if out_bits is None:
        opens = tuple(range(n))
        out_s = None
    else:
        out_s = _as_bits(out_bits, n)
        opens = tuple(sorted(set(int(q) for q in open_sites)))

    nw = max(1, -(-t // WINDOW))
    # site -> cycle -> gate, for the two-qubit cycles only
    per_site: list[dict[int, object]] = [dict() for _ in range(n)]
    for g in circuit.gates:
        if 0 < g.cycle <= t:
            for q in g.qubits:
                per_site[q][g.cycle] = g

    blocks: dict[int, list[Tensor]] = {}
    for q in range(n):
        stack = []
        for w in range(nw):
            if w == 0:
                arr = _H[:, int(in_s[q])].copy()  # first H layer on |in>
                labels = []
            else:
                arr = np.eye(2, dtype=np.complex128)
                labels = [time_bond(q, w)]
            for cyc in range(WINDOW * w + 1, min(WINDOW * (w + 1), t) + 1):
                g = per_site[q].get(cyc)
                if g is None:
                    continue
                if len(g.qubits) == 1:
                    arr = arr @ _GATE_1Q[g.name].T
                else:
                    a, b = g.qubits
                    side = 0 if q == a else 1
                    factor = _GATE_2Q[g.name][side]
                    arr = np.einsum("...s,bso->...bo", arr, factor)
                    labels.append(window_bond(w, a, b))
            if w == nw - 1:
                arr = arr @ _H.T  # final H layer
                if q in opens:
                    labels.append(out_label(q))
                else:
                    arr = arr[..., int(out_s[q])]
            else:
                labels.append(time_bond(q, w + 1))
            stack.append(Tensor(tuple(labels), np.ascontiguousarray(arr.astype(dtype))))
        blocks[q] = stack
    return Net3D(circuit, blocks, nw, in_s, out_s, opens, np.dtype(dtype))


def contract_time(net: Net3D, fold_corners: bool = True) -> Net2D:
    """Collapse window blocks along time and merge per-edge window bonds.

    On the full 72-site bristlecone lattice the two degree-1 corner sites
    are folded into their only neighbors, reducing the grid to the 70-site
    frame the contraction plans use.
    """
    circuit = net.circuit
    lattice = circuit.lattice
    tensors: dict[int, Tensor] = {}
    for q, stack in net.blocks.items():
        cur = stack[0]
        for blk in stack[1:]:
            cur = contract(cur, blk)
        tensors[q] = cur

    if fold_corners and lattice.kind == "bristlecone-72":
        for rc in ((0, 5), (11, 5)):
            corner = lattice.site_id(rc)
            nbr = lattice.neighbors(corner)[0]
            tensors[nbr] = contract(tensors.pop(corner), tensors[nbr])

    bond_dim: dict[tuple[int, int], int] = {}
    for a, b in lattice.edges():
        if a not in tensors or b not in tensors:
            continue  # folded corner: bond already contracted away
        members = [l for l in tensors[a].labels if l.endswith(f"_{a}_{b}")]
        members.sort(key=lambda l: int(l[1:l.index("_")]))  # window order
        if not members:
            continue
        merged = edge_label(a, b)
        for site in (a, b):
            tensors[site] = _merge_labels(tensors[site], merged, members)
        bond_dim[(a, b)] = 1 << len(members)

    # canonical index order: merged edges by neighbor pair, then open outputs
    for site, t in tensors.items():
        edges = sorted(l for l in t.labels if l.startswith("e"))
        outs = sorted((l for l in t.labels if l.startswith("out")),
                      key=lambda l: int(l[3:]))
        tensors[site] = t.transpose_to(tuple(edges + outs))

    return Net2D(circuit, tensors, bond_dim, net.in_bits, net.out_bits,
                 net.open_sites)


def _merge_labels(t: Tensor, new_label: str, members: Sequence[str]) -> Tensor:
    """Combine the member indexes (in the given order) into one label.

    The merged index sits where the first member currently appears; its
    most significant factor is members[0].
    """
    member_set = set(members)
    if not member_set <= set(t.labels):
        raise ValueError(f"{members} not all present in {t.labels}")
    flat: list[str] = []          # transpose target, members made adjacent
    out_labels: list[str] = []    # labels after the reshape
    group_sizes: list[int] = []   # axes merged per output label
    placed = False
    for l in t.labels:
        if l in member_set:
            if not placed:
                flat.extend(members)
                out_labels.append(new_label)
                group_sizes.append(len(members))
                placed = True
        else:
            flat.append(l)
            out_labels.append(l)
            group_sizes.append(1)
    tt = t.transpose_to(tuple(flat))
    shape = []
    i = 0
    for g in group_sizes:
        shape.append(math.prod(tt.array.shape[i:i + g]))
        i += g
    return Tensor(tuple(out_labels), tt.array.reshape(shape))


def contract_grid(net: Net2D, order: Optional[Sequence[int]] = None,
                  thread_count: int = 1) -> Tensor:
    """Contract every site tensor in the given (default: id) order.

    Reference path for small networks; large lattices need a proper plan.
    """
    sites = list(order) if order is not None else sorted(net.tensors)
    cur = net.tensors[sites[0]]
    for s in sites[1:]:
        cur = contract(cur, net.tensors[s], thread_count)
    return cur
