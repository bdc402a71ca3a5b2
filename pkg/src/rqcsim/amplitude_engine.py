"""Amplitude computation: circuits in, (batches of) amplitudes out.

The engine owns the expensive artifacts — the all-outputs-open 2D network
for a circuit and the contraction plan — and answers amplitude queries by
slicing output indexes and summing the plan's paths.  Keeping every
output open in the cached network means one network build serves any
number of queried bit-strings; fixing an output is a cheap slice.

Fidelity is traded for cost by keeping only a fraction ``f`` of the
paths: the resulting state has fidelity f against the exact one, and the
returned amplitudes are the corresponding sub-sums.  ``f_achieved_estimate``
on the emitted records is N * |a|^2 per amplitude; averaged over many
random bit-strings of a chaotic circuit it estimates the achieved
fidelity (it concentrates around f).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

from .circuits import Circuit
from .contraction_plan import (ContractionPlan, PlanExecutor, builtin_plan,
                               enumerate_paths)
from .network_builder import Net2D, build_3d, contract_time, out_label


@dataclass(frozen=True)
class FidelitySpec:
    """Which fraction of paths to sum, and which ones.

    ``f=1`` keeps every path (exact amplitudes).  For smaller ``f`` the
    kept paths are a seeded uniform draw, so two runs with the same spec
    see the same sub-sum.
    """

    f: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.f <= 1.0:
            raise ValueError(f"fidelity fraction must be in (0, 1], got {self.f}")

    def paths_for(self, cut_dims: Sequence[int]) -> list[tuple[int, ...]]:
        return enumerate_paths(cut_dims, f=self.f, seed=self.seed)


@dataclass(frozen=True)
class PathStats:
    """What one amplitude (or batch) cost."""

    paths_total: int
    paths_used: int
    flops: int
    peak_bytes: int


@dataclass(frozen=True)
class AmplitudeBatch:
    """Amplitudes for one fixed s_AB and many completions of region C."""

    in_bits: str
    s_ab: str                      # bits of the non-open qubits, by qubit id
    c_sites: tuple[int, ...]       # open qubits, ascending
    c_values: tuple[int, ...]      # completions, as integers over c_sites bits
    amplitudes: np.ndarray         # complex, aligned with c_values
    fidelity: FidelitySpec
    stats: PathStats

    def __len__(self) -> int:
        return len(self.c_values)

    def out_bits(self, i: int) -> str:
        """Full output bit-string for entry i (qubit 0 leftmost)."""
        n = len(self.in_bits)
        bits = list(self.s_ab)
        cbits = format(self.c_values[i], f"0{len(self.c_sites)}b")
        for q, b in zip(self.c_sites, cbits):
            bits[q] = b
        return "".join(bits)


class AmplitudeEngine:
    """Computes amplitudes of one circuit via its contraction plan."""

    def __init__(self, circuit: Circuit, plan: Optional[ContractionPlan] = None,
                 *, dtype=np.complex64, thread_count: int = 1,
                 memory_budget: Optional[int] = None):
        self.circuit = circuit
        self.plan = plan if plan is not None else builtin_plan(circuit.lattice)
        self.dtype = np.dtype(dtype)
        self.thread_count = thread_count
        self.memory_budget = memory_budget
        self._nets: dict[str, Net2D] = {}  # in_bits -> all-outputs-open network

    def base_net(self, in_bits: Union[str, int] = 0) -> Net2D:
        """The all-outputs-open network for ``in_bits`` (cached)."""
        key = _bits_str(in_bits, self.circuit.n)
        net = self._nets.get(key)
        if net is None:
            net = contract_time(build_3d(self.circuit, in_bits=key,
                                         out_bits=None, dtype=self.dtype))
            self._nets[key] = net
        return net

    def _executor(self, net: Net2D) -> PlanExecutor:
        return PlanExecutor(net, self.plan, thread_count=self.thread_count,
                            memory_budget=self.memory_budget)

    def amplitude(self, in_bits: Union[str, int], out_bits: Union[str, int],
                  fidelity: FidelitySpec = FidelitySpec()) -> tuple[complex, PathStats]:
        """One amplitude <out|U|in>, summed over the selected paths."""
        n = self.circuit.n
        out = _bits_str(out_bits, n)
        net = self.base_net(in_bits).fix_outputs(
            {q: int(b) for q, b in enumerate(out)})
        ex = self._executor(net)
        paths = fidelity.paths_for(ex.cut_dims)
        total = sum(ex.run(p).scalar() for p in paths)
        stats = PathStats(math.prod(ex.cut_dims), len(paths), ex.flops,
                          ex.peak_bytes)
        return total, stats

    def amplitude_batch(self, in_bits: Union[str, int], s_ab: Union[str, int],
                        c_sites: Sequence[int], n_c: int, *, seed: int = 0,
                        fidelity: FidelitySpec = FidelitySpec()) -> AmplitudeBatch:
        """Amplitudes for ``n_c`` distinct completions of the open region.

        ``s_ab`` fixes the output bits of every qubit outside ``c_sites``
        (its bits at the open positions are ignored).  The completions are
        a seeded draw without replacement from the 2^|C| assignments, so a
        batch is n_c candidate bit-strings sharing one contraction.
        """
        n = self.circuit.n
        c_sites = tuple(sorted(c_sites))
        if not c_sites:
            raise ValueError("batch region is empty")
        if len(set(c_sites)) != len(c_sites):
            raise ValueError("duplicate sites in batch region")
        if not 1 <= n_c <= 2 ** len(c_sites):
            raise ValueError(f"n_c={n_c} not in [1, 2^{len(c_sites)}]")
        s_ab = _bits_str(s_ab, n)
        open_set = set(c_sites)

        net = self.base_net(in_bits).fix_outputs(
            {q: int(b) for q, b in enumerate(s_ab) if q not in open_set})
        ex = self._executor(net)
        paths = fidelity.paths_for(ex.cut_dims)
        acc = None
        for p in paths:
            t = ex.run(p)
            t = t.transpose_to(tuple(out_label(q) for q in c_sites))
            acc = t.array.copy() if acc is None else acc + t.array

        rng = np.random.Generator(np.random.PCG64(seed))
        if n_c == 2 ** len(c_sites):
            values = np.arange(n_c)
        else:
            values = np.sort(rng.choice(2 ** len(c_sites), size=n_c,
                                        replace=False))
        amps = acc.reshape(-1)[values]
        stats = PathStats(math.prod(ex.cut_dims), len(paths), ex.flops,
                          ex.peak_bytes)
        return AmplitudeBatch(_bits_str(in_bits, n), s_ab, c_sites,
                              tuple(int(v) for v in values), amps,
                              fidelity, stats)

    def state(self, in_bits: Union[str, int] = 0,
              fidelity: FidelitySpec = FidelitySpec()) -> np.ndarray:
        """Full output state as a 2^n vector (qubit 0 is the leading bit).

        Exponential in qubit count — a diagnostic for desk-scale circuits,
        and the reference for fidelity-versus-fraction experiments.
        """
        net = self.base_net(in_bits)
        ex = self._executor(net)
        order = tuple(out_label(q) for q in range(self.circuit.n))
        acc = None
        for p in fidelity.paths_for(ex.cut_dims):
            arr = ex.run(p).transpose_to(order).array.reshape(-1)
            acc = arr.copy() if acc is None else acc + arr
        return acc


def _bits_str(value: Union[str, int], n: int) -> str:
    if isinstance(value, str):
        if len(value) != n or set(value) - {"0", "1"}:
            raise ValueError(f"need {n} bits, got {value!r}")
        return value
    if not 0 <= value < 2 ** n:
        raise ValueError(f"bit value {value} out of range for {n} qubits")
    return format(value, f"0{n}b")


def mixed_state_samples(circuit: Circuit, f: float, count: int,
                        seed: int = 0) -> np.ndarray:
    """Bit-string samples from a state of fidelity ``f``.

    Draws from the exact output distribution with probability f and from
    the uniform distribution otherwise — the standard stand-in for a noisy
    sampler whose cross-entropy fidelity is f.  Needs the exact
    distribution, so it is desk-scale only.
    """
    from . import oracle

    if not 0.0 <= f <= 1.0:
        raise ValueError(f"fidelity must be in [0, 1], got {f}")
    probs = oracle.exact_distribution(circuit)
    rng = np.random.Generator(np.random.PCG64(seed))
    n_states = probs.size
    exact = rng.choice(n_states, size=count, p=probs)
    uniform = rng.integers(0, n_states, size=count)
    take_exact = rng.random(count) < f
    return np.where(take_exact, exact, uniform)


def amplitude_record(in_bits: str, out_bits: str, amplitude: complex,
                     fidelity: FidelitySpec, stats: PathStats) -> dict:
    """One JSON-ready record; ``f_achieved_estimate`` is N * |a|^2, whose
    mean over many random bit-strings estimates the achieved fidelity."""
    a = complex(amplitude)
    return {
        "in": in_bits,
        "out": out_bits,
        "re": a.real,
        "im": a.imag,
        "f_target": fidelity.f,
        "f_achieved_estimate": (2 ** len(in_bits)) * abs(a) ** 2,
        "paths": stats.paths_used,
        "seed": fidelity.seed,
    }


def batch_records(batch: AmplitudeBatch) -> Iterable[dict]:
    """Flatten a batch into one record per amplitude."""
    for i in range(len(batch)):
        yield amplitude_record(batch.in_bits, batch.out_bits(i),
                               batch.amplitudes[i], batch.fidelity, batch.stats)


def write_amplitudes(fh: IO[str], records: Iterable[dict]):
    """JSON-lines writer: one record per line."""
    for record in records:
        fh.write(json.dumps(record) + "\n")


def read_amplitudes(fh: IO[str]) -> list[dict]:
    """JSON-lines reader; skips blank lines."""
    return [json.loads(line) for line in fh if line.strip()]
