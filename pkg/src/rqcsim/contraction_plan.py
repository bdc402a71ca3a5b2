"""Contraction plans: index cuts, nested loops, and tensor reuse.

A plan turns one big network contraction into a sum over *paths*.  Each
``cut`` names a bond (or group of bonds) whose index is fixed rather than
summed; a *path* is one assignment of values to all cuts, and summing the
plan's scalar output over every path reproduces the uncut contraction
exactly.  Cuts buy two things: the sliced intermediates are smaller (so
deep circuits fit in memory), and discarding a fraction of paths yields a
cheaper simulation whose output state has fidelity equal to the fraction
kept.

A plan is an ordered program of four statement kinds::

    cut <name> <a>:<b> [<a>:<b> ...] [values=v0,v1,...]
    loop <cut-name>
    contract <in> <in> ... -> <out> [reuse=global|outer]
    output <name>

``contract`` inputs are site tensors (``t12``) or earlier intermediates;
the executor folds them left to right.  ``loop`` statements open the
per-cut loops in declaration order and extend to the end of the program.
Steps placed before a cut's ``loop`` may not consume tensors sliced by
that cut; steps inside the loops are cached by the cut values they
actually depend on, so a step whose dependencies did not change between
consecutive paths is never recomputed (paths are visited in lexicographic
order to maximise those hits).  ``reuse=`` annotations are declarative
claims checked against the computed dependency sets: ``global`` promises
independence from every cut, ``outer`` promises independence from at
least the innermost one.

``builtin_plan`` returns hand-tuned plans (shipped as text files) for the
Bristlecone lattices and the 7x7 grid, and generates a balanced two-region
plan for any other rectangle.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuits import DepthSpec, Lattice, edge_activations
from .network_builder import Net2D, edge_label, out_label
from .tensor_core import Tensor, contract


class PlanError(ValueError):
    """A plan is malformed or inconsistent with the lattice it targets."""


class MemoryBudgetError(RuntimeError):
    """Executing (or estimating) a plan would exceed the memory budget."""


# ---------------------------------------------------------------------------
# plan model


@dataclass(frozen=True)
class CutSpec:
    """A named group of bonds whose joint index is enumerated, not summed."""

    name: str
    bonds: tuple[tuple[int, int], ...]
    values: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        bonds = tuple(tuple(sorted(b)) for b in self.bonds)
        object.__setattr__(self, "bonds", bonds)
        if len(set(bonds)) != len(bonds):
            raise PlanError(f"cut {self.name!r} lists a bond twice")


@dataclass(frozen=True)
class ContractStep:
    """Fold ``inputs`` (left to right) into a tensor named ``name``."""

    inputs: tuple[str, ...]
    name: str
    reuse: Optional[str] = None

    def __post_init__(self):
        if not self.inputs:
            raise PlanError(f"step {self.name!r} has no inputs")
        if self.reuse not in (None, "global", "outer"):
            raise PlanError(f"step {self.name!r}: unknown reuse={self.reuse!r}")


@dataclass(frozen=True)
class ContractionPlan:
    """An ordered cut/loop/contract/output program for one lattice."""

    lattice_kind: str
    cuts: tuple[CutSpec, ...]
    program: tuple[tuple, ...]
    batch_sites: tuple[int, ...] = ()

    @property
    def cut_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.cuts)

    @property
    def num_cuts(self) -> int:
        return len(self.cuts)

    def steps(self) -> Iterable[ContractStep]:
        for kind, payload in self.program:
            if kind == "contract":
                yield payload

    def site_ids(self) -> set[int]:
        """All site tensors referenced by the program."""
        sites = set()
        for step in self.steps():
            for name in step.inputs:
                if _SITE_RE.fullmatch(name):
                    sites.add(int(name[1:]))
        return sites

    def cut_dims(self, bond_dims: dict[tuple[int, int], int]) -> tuple[int, ...]:
        """Loop lengths per cut, given per-bond dimensions."""
        dims = []
        for cut in self.cuts:
            if cut.values is not None:
                dims.append(len(cut.values))
            else:
                dims.append(math.prod(bond_dims.get(b, 1) for b in cut.bonds))
        return tuple(dims)

    def analyze(self, lattice: Lattice) -> "PlanAnalysis":
        return _analyze(self, lattice)

    def format(self) -> str:
        return format_plan(self)


@dataclass
class PlanAnalysis:
    """Static facts about a validated plan (dependencies, loop nesting)."""

    site_cuts: dict[int, tuple[int, ...]]  # site id -> cut indexes slicing it
    step_deps: dict[str, tuple[int, ...]]  # step name -> cut indexes it depends on
    output_name: str = ""


_SITE_RE = re.compile(r"t(\d+)")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _analyze(plan: ContractionPlan, lattice: Lattice) -> PlanAnalysis:
    """Validate ``plan`` against ``lattice`` and compute dependency sets."""
    if len(set(plan.cut_names)) != len(plan.cuts):
        raise PlanError("duplicate cut names")
    cut_index = {c.name: i for i, c in enumerate(plan.cuts)}

    site_cuts: dict[int, list[int]] = {}
    seen_bonds = set()
    for i, cut in enumerate(plan.cuts):
        for a, b in cut.bonds:
            if not lattice.adjacent(a, b):
                raise PlanError(f"cut {cut.name!r}: {a}:{b} is not a lattice bond")
            if (a, b) in seen_bonds:
                raise PlanError(f"bond {a}:{b} appears in two cuts")
            seen_bonds.add((a, b))
            site_cuts.setdefault(a, []).append(i)
            site_cuts.setdefault(b, []).append(i)

    opened: list[int] = []
    defined: dict[str, tuple[int, ...]] = {}
    consumed_sites: set[int] = set()
    step_deps: dict[str, tuple[int, ...]] = {}
    produced_by: dict[str, ContractStep] = {}
    used: set[str] = set()
    output_name = None

    for kind, payload in plan.program:
        if kind == "loop":
            if payload not in cut_index:
                raise PlanError(f"loop over undeclared cut {payload!r}")
            idx = cut_index[payload]
            if opened and idx <= opened[-1]:
                raise PlanError("loops must open cuts in declaration order")
            opened.append(idx)
        elif kind == "contract":
            step = payload
            if output_name is not None:
                raise PlanError("contract step after output")
            if step.name in defined or _SITE_RE.fullmatch(step.name):
                raise PlanError(f"name {step.name!r} already defined")
            deps: set[int] = set()
            for name in step.inputs:
                m = _SITE_RE.fullmatch(name)
                if m:
                    site = int(m.group(1))
                    if not 0 <= site < lattice.n:
                        raise PlanError(f"step {step.name!r}: no site {site}")
                    if site in consumed_sites:
                        raise PlanError(f"site tensor t{site} consumed twice")
                    consumed_sites.add(site)
                    deps.update(site_cuts.get(site, ()))
                elif name in defined:
                    deps.update(defined[name])
                    used.add(name)
                else:
                    raise PlanError(f"step {step.name!r}: undefined input {name!r}")
            if not deps.issubset(opened):
                missing = [plan.cuts[i].name for i in sorted(deps - set(opened))]
                raise PlanError(
                    f"step {step.name!r} uses cut tensors before loop(s) "
                    f"{missing} are open"
                )
            if step.reuse == "global" and deps:
                raise PlanError(f"step {step.name!r} marked global but depends on cuts")
            if step.reuse == "outer" and len(deps) >= len(plan.cuts):
                raise PlanError(
                    f"step {step.name!r} marked outer but depends on every cut"
                )
            defined[step.name] = tuple(sorted(deps))
            step_deps[step.name] = defined[step.name]
            produced_by[step.name] = step
        elif kind == "output":
            if payload not in defined:
                raise PlanError(f"output references undefined name {payload!r}")
            if output_name is not None:
                raise PlanError("plan has two output statements")
            output_name = payload
            used.add(payload)
        else:  # pragma: no cover - parser never emits other kinds
            raise PlanError(f"unknown statement kind {kind!r}")

    if output_name is None:
        raise PlanError("plan has no output statement")
    if len(opened) != len(plan.cuts):
        unlooped = [c.name for i, c in enumerate(plan.cuts) if i not in opened]
        raise PlanError(f"cuts never looped: {unlooped}")

    # Every defined intermediate must feed the output, and the output must
    # see every consumed site: anything dangling means a mis-typed plan.
    reach = set()
    stack = [output_name]
    while stack:
        name = stack.pop()
        if name in reach:
            continue
        reach.add(name)
        step = produced_by.get(name)
        if step is not None:
            stack.extend(n for n in step.inputs if not _SITE_RE.fullmatch(n))
    dangling = set(defined) - reach
    if dangling:
        raise PlanError(f"intermediates never used by output: {sorted(dangling)}")

    for site in set(plan.batch_sites):
        if not 0 <= site < lattice.n:
            raise PlanError(f"batch region references missing site {site}")

    return PlanAnalysis(
        site_cuts={s: tuple(v) for s, v in site_cuts.items()},
        step_deps=step_deps,
        output_name=output_name,
    )


# ---------------------------------------------------------------------------
# text format


def parse_plan(text: str) -> ContractionPlan:
    """Parse the plan text format (see module docstring)."""
    lattice_kind = None
    cuts: list[CutSpec] = []
    program: list[tuple] = []
    batch_sites: tuple[int, ...] = ()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kw = tokens[0]
        try:
            if kw == "plan":
                lattice_kind = tokens[1]
            elif kw == "batch":
                batch_sites = tuple(int(t) for t in tokens[1:])
            elif kw == "cut":
                name = tokens[1]
                bonds = []
                values = None
                for tok in tokens[2:]:
                    if tok.startswith("values="):
                        values = tuple(int(v) for v in tok[7:].split(","))
                    else:
                        a, b = tok.split(":")
                        bonds.append((int(a), int(b)))
                cuts.append(CutSpec(name, tuple(bonds), values))
            elif kw == "loop":
                program.append(("loop", tokens[1]))
            elif kw == "contract":
                arrow = tokens.index("->")
                inputs = tuple(tokens[1:arrow])
                name = tokens[arrow + 1]
                reuse = None
                for tok in tokens[arrow + 2:]:
                    if tok.startswith("reuse="):
                        reuse = tok[6:]
                    else:
                        raise PlanError(f"unexpected token {tok!r}")
                if not _NAME_RE.fullmatch(name):
                    raise PlanError(f"bad tensor name {name!r}")
                program.append(("contract", ContractStep(inputs, name, reuse)))
            elif kw == "output":
                program.append(("output", tokens[1]))
            else:
                raise PlanError(f"unknown statement {kw!r}")
        except PlanError as exc:
            raise PlanError(f"line {lineno}: {exc}") from None
        except (ValueError, IndexError) as exc:
            raise PlanError(f"line {lineno}: {exc}") from None

    if lattice_kind is None:
        raise PlanError("missing 'plan <lattice>' header line")
    return ContractionPlan(lattice_kind, tuple(cuts), tuple(program), batch_sites)


def format_plan(plan: ContractionPlan) -> str:
    """Render a plan in the text format; inverse of :func:`parse_plan`."""
    lines = [f"plan {plan.lattice_kind}"]
    if plan.batch_sites:
        lines.append("batch " + " ".join(str(s) for s in plan.batch_sites))
    for cut in plan.cuts:
        bonds = " ".join(f"{a}:{b}" for a, b in cut.bonds)
        line = f"cut {cut.name} {bonds}"
        if cut.values is not None:
            line += " values=" + ",".join(str(v) for v in cut.values)
        lines.append(line)
    for kind, payload in plan.program:
        if kind == "loop":
            lines.append(f"loop {payload}")
        elif kind == "contract":
            line = f"contract {' '.join(payload.inputs)} -> {payload.name}"
            if payload.reuse:
                line += f" reuse={payload.reuse}"
            lines.append(line)
        else:
            lines.append(f"output {payload}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# path enumeration


def enumerate_paths(cut_dims: Sequence[int], f: float = 1.0,
                    seed: int = 0, count: Optional[int] = None) -> list[tuple[int, ...]]:
    """Paths (one cut value per cut) in lexicographic order.

    With ``f=1`` the full Cartesian product is returned.  For ``f < 1`` (or
    an explicit ``count``) ceil(f * total) distinct paths are drawn without
    replacement using the given seed, then sorted; keeping that fraction of
    paths yields an output state of fidelity f.
    """
    dims = tuple(int(d) for d in cut_dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"cut dims must be positive, got {dims}")
    total = math.prod(dims)
    if count is None:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fidelity fraction must be in (0, 1], got {f}")
        count = math.ceil(f * total)
    if not 1 <= count <= total:
        raise ValueError(f"path count {count} not in [1, {total}]")

    if count == total:
        return list(itertools.product(*(range(d) for d in dims)))

    rng = np.random.Generator(np.random.PCG64(seed))
    ids = np.sort(rng.choice(total, size=count, replace=False))
    paths = []
    for pid in ids.tolist():
        path = []
        for d in reversed(dims):
            path.append(pid % d)
            pid //= d
        paths.append(tuple(reversed(path)))
    return paths


def _decode_bond_values(cut: CutSpec, value: int,
                        bond_dims: dict[tuple[int, int], int]) -> dict[tuple[int, int], int]:
    """Split a cut's joint value into one index per bond (first bond is
    the most significant digit, matching lexicographic path order)."""
    if cut.values is not None:
        value = cut.values[value]
    out = {}
    for bond in reversed(cut.bonds):
        d = bond_dims.get(bond, 1)
        out[bond] = value % d
        value //= d
    return out


# ---------------------------------------------------------------------------
# execution


class PlanExecutor:
    """Runs a plan against a 2D network, one path at a time.

    The executor keeps a last-value cache per step, keyed by the values of
    the cuts that step actually depends on, so iterating paths in
    lexicographic order recomputes only the steps whose loop variables
    changed.  ``enable_reuse=False`` disables the cache (every step then
    recomputes on every path), which is useful for timing comparisons.
    """

    def __init__(self, net: Net2D, plan: ContractionPlan, *,
                 enable_reuse: bool = True, thread_count: int = 1,
                 memory_budget: Optional[int] = None):
        self.net = net
        self.plan = plan
        self.enable_reuse = enable_reuse
        self.thread_count = thread_count
        self.memory_budget = memory_budget
        self.analysis = plan.analyze(net.circuit.lattice)

        missing = set(net.tensors) - plan.site_ids()
        if missing:
            raise PlanError(f"plan never consumes site tensors {sorted(missing)}")
        extra = plan.site_ids() - set(net.tensors)
        if extra:
            raise PlanError(f"plan references absent site tensors {sorted(extra)}")
        for cut in plan.cuts:
            if cut.values is not None:
                top = math.prod(net.bond_dim.get(b, 1) for b in cut.bonds)
                if any(not 0 <= v < top for v in cut.values):
                    raise PlanError(f"cut {cut.name!r} values out of range")
        self.cut_dims = self.plan.cut_dims(net.bond_dim)

        self.flops = 0
        self.peak_bytes = 0
        self._step_cache: dict[str, tuple[tuple[int, ...], Tensor]] = {}
        self._site_cache: dict[int, tuple[tuple[int, ...], Tensor]] = {}

    def _site_tensor(self, site: int, path: tuple[int, ...]) -> Tensor:
        cuts = self.analysis.site_cuts.get(site, ())
        if not cuts:
            return self.net.tensors[site]
        key = tuple(path[i] for i in cuts)
        cached = self._site_cache.get(site)
        if cached is not None and cached[0] == key:
            return cached[1]
        tensor = self.net.tensors[site]
        for i in cuts:
            cut = self.plan.cuts[i]
            for bond, value in _decode_bond_values(cut, path[i], self.net.bond_dim).items():
                label = edge_label(*bond)
                if label in tensor.labels:
                    tensor = tensor.fix(label, value)
        self._site_cache[site] = (key, tensor)
        return tensor

    def _account(self, live: int, out_bytes: int):
        used = live + out_bytes
        if used > self.peak_bytes:
            self.peak_bytes = used
        if self.memory_budget is not None and used > self.memory_budget:
            raise MemoryBudgetError(
                f"live set {used} bytes exceeds budget {self.memory_budget}"
            )

    def run(self, path: tuple[int, ...]) -> Tensor:
        """Execute one path; returns the output tensor (scalar-ranked
        unless the network has open outputs)."""
        if len(path) != len(self.plan.cuts):
            raise ValueError(f"path has {len(path)} values, plan has "
                             f"{len(self.plan.cuts)} cuts")
        for value, dim in zip(path, self.cut_dims):
            if not 0 <= value < dim:
                raise ValueError(f"path value {value} out of range [0, {dim})")

        values: dict[str, Tensor] = {}
        deps = self.analysis.step_deps
        for kind, payload in self.plan.program:
            if kind == "loop":
                continue
            if kind == "output":
                return values[payload]
            step = payload
            key = tuple(path[i] for i in deps[step.name])
            if self.enable_reuse:
                cached = self._step_cache.get(step.name)
                if cached is not None and cached[0] == key:
                    values[step.name] = cached[1]
                    continue
            live = sum(t.array.nbytes for _, t in self._step_cache.values())
            acc = None
            for name in step.inputs:
                m = _SITE_RE.fullmatch(name)
                operand = self._site_tensor(int(m.group(1)), path) if m else values[name]
                if acc is None:
                    acc = operand
                    continue
                shared = set(acc.labels) & set(operand.labels)
                m_dim = math.prod(d for l, d in zip(acc.labels, acc.dims)
                                  if l not in shared)
                k_dim = math.prod(d for l, d in zip(acc.labels, acc.dims)
                                  if l in shared)
                n_dim = math.prod(d for l, d in zip(operand.labels, operand.dims)
                                  if l not in shared)
                self.flops += 8 * m_dim * k_dim * n_dim
                self._account(live + acc.array.nbytes + operand.array.nbytes,
                              m_dim * n_dim * acc.array.itemsize)
                acc = contract(acc, operand, thread_count=self.thread_count)
            values[step.name] = acc
            if self.enable_reuse:
                self._step_cache[step.name] = (key, acc)
        raise PlanError("program ended without output")  # pragma: no cover


def execute_plan(net: Net2D, plan: ContractionPlan, path: tuple[int, ...], *,
                 enable_reuse: bool = True, thread_count: int = 1,
                 memory_budget: Optional[int] = None) -> Tensor:
    """One-shot convenience wrapper; reuse :class:`PlanExecutor` across
    paths when summing more than one."""
    ex = PlanExecutor(net, plan, enable_reuse=enable_reuse,
                      thread_count=thread_count, memory_budget=memory_budget)
    return ex.run(path)


# ---------------------------------------------------------------------------
# cost model


@dataclass(frozen=True)
class StepCost:
    name: str
    flops: int
    out_entries: int
    evaluations: int  # distinct dependency-value combinations


@dataclass(frozen=True)
class CostEstimate:
    """Symbolic cost of running a plan over its full path space."""

    paths: int
    total_flops: int
    peak_bytes: int
    steps: tuple[StepCost, ...] = field(repr=False, default=())

    @property
    def flops_per_path(self) -> float:
        return self.total_flops / self.paths

    @property
    def log2_flops(self) -> float:
        return math.log2(self.total_flops) if self.total_flops else 0.0


def estimate_cost(plan: ContractionPlan, lattice: Lattice, depth, *,
                  open_sites: Sequence[int] = (), itemsize: int = 8,
                  with_reuse: bool = True) -> CostEstimate:
    """Walk the plan symbolically (shapes only) and price it.

    Flops follow the 8-real-ops-per-complex-multiply-add convention and
    assume straight pairwise matrix products.  Evaluation counts model the
    executor's last-value cache under lexicographic path order: a step
    reruns whenever any loop at or above its innermost dependency ticks,
    so its count is the product of the loop lengths down to that depth.
    ``peak_bytes`` models the live set: every step's latest output stays
    cached, plus the operands of the widest single contraction.
    """
    t = DepthSpec.parse(depth).t
    analysis = plan.analyze(lattice)
    acts = edge_activations(lattice, t)
    bond_dims = {bond: 2 ** k for bond, k in acts.items() if k > 0}
    open_set = set(open_sites)

    def site_labels(site: int) -> dict[str, int]:
        labels = {}
        for bond, dim in bond_dims.items():
            if site in bond:
                labels[edge_label(*bond)] = dim
        if site in open_set:
            labels[out_label(site)] = 2
        return labels

    cut_dims = plan.cut_dims(bond_dims)
    paths = math.prod(cut_dims)
    sliced = {edge_label(*b): 1 for cut in plan.cuts for b in cut.bonds}

    values: dict[str, dict[str, int]] = {}
    steps: list[StepCost] = []
    total = 0
    cached_bytes = 0
    peak = 0
    for kind, payload in plan.program:
        if kind != "contract":
            continue
        step = payload
        flops = 0
        acc: Optional[dict[str, int]] = None
        widest = 0
        for name in step.inputs:
            m = _SITE_RE.fullmatch(name)
            if m:
                operand = site_labels(int(m.group(1)))
                operand.update((l, 1) for l in operand.keys() & sliced.keys())
            else:
                operand = values[name]
            if acc is None:
                acc = dict(operand)
                continue
            shared = acc.keys() & operand.keys()
            m_dim = math.prod(d for l, d in acc.items() if l not in shared)
            k_dim = math.prod(d for l, d in acc.items() if l in shared)
            n_dim = math.prod(d for l, d in operand.items() if l not in shared)
            flops += 8 * m_dim * k_dim * n_dim
            operands = (m_dim * k_dim + k_dim * n_dim) * itemsize
            widest = max(widest, operands + m_dim * n_dim * itemsize)
            merged = {l: d for l, d in acc.items() if l not in shared}
            merged.update((l, d) for l, d in operand.items() if l not in shared)
            acc = merged
        values[step.name] = acc
        out_entries = math.prod(acc.values())
        deps = analysis.step_deps[step.name]
        if not with_reuse:
            evals = paths
        elif not deps:
            evals = 1
        else:
            evals = math.prod(cut_dims[:max(deps) + 1])
        steps.append(StepCost(step.name, flops, out_entries, evals))
        total += flops * evals
        peak = max(peak, cached_bytes + widest)
        cached_bytes += out_entries * itemsize
        peak = max(peak, cached_bytes)
    return CostEstimate(paths, total, peak, tuple(steps))


# ---------------------------------------------------------------------------
# built-in plans


def _region_order(lattice: Lattice, sites: Sequence[int]) -> list[int]:
    """Greedy contraction order for one region: grow a cluster from the
    lowest site id, always absorbing the neighbouring site that keeps the
    cluster boundary (open bond count) smallest."""
    remaining = set(sites)
    start = min(remaining)
    order = [start]
    cluster = {start}
    remaining.discard(start)

    def boundary(cl: set[int]) -> int:
        return sum(1 for a, b in lattice.edges()
                   if (a in cl) != (b in cl))

    while remaining:
        frontier = {s for s in remaining
                    if any(n in cluster for n in lattice.neighbors(s))}
        candidates = frontier or remaining
        best = min(candidates, key=lambda s: (boundary(cluster | {s}), s))
        order.append(best)
        cluster.add(best)
        remaining.discard(best)
    return order


def _region_steps(lattice: Lattice, name: str, sites: Sequence[int],
                  reuse: Optional[str]) -> ContractStep:
    order = _region_order(lattice, sites)
    return ContractStep(tuple(f"t{s}" for s in order), name, reuse)


def two_region_plan(lattice: Lattice, region_a: set[int], region_b: set[int],
                    region_c: set[int], cut_bonds: Sequence[tuple[int, int]],
                    cut_prefix: str = "w") -> ContractionPlan:
    """Assemble the standard A x B (x C) plan shape used by every builtin:
    cut-free region cores contract once, each loop folds in the sites the
    newly-opened cut slices, and the batch-friendly C region joins last."""
    cuts = tuple(CutSpec(f"{cut_prefix}{i}", (tuple(sorted(b)),))
                 for i, b in enumerate(cut_bonds))
    regions = {"A": set(region_a), "B": set(region_b), "C": set(region_c)}
    # A sliced site joins its region only once every cut touching it is open.
    join_at: dict[str, dict[int, list[int]]] = {r: {} for r in regions}
    for rname, rsites in regions.items():
        for site in sorted(rsites):
            touching = [i for i, cut in enumerate(cuts) if site in cut.bonds[0]]
            if touching:
                join_at[rname].setdefault(max(touching), []).append(site)
                rsites.discard(site)

    program: list[tuple] = []
    current: dict[str, str] = {}
    for rname in ("A", "B", "C"):
        if regions[rname]:
            core = f"{rname}0" if join_at[rname] else rname
            program.append(("contract",
                            _region_steps(lattice, core, regions[rname], "global")))
            current[rname] = core

    for i, cut in enumerate(cuts):
        program.append(("loop", cut.name))
        for rname in ("A", "B", "C"):
            add = join_at[rname].get(i)
            if not add:
                continue
            inputs = ([current[rname]] if rname in current else []) + \
                [f"t{s}" for s in add]
            new = rname if i == max(join_at[rname]) else f"{rname}{i + 1}"
            reuse = "outer" if i + 1 < len(cuts) else None
            program.append(("contract", ContractStep(tuple(inputs), new, reuse)))
            current[rname] = new

    names = [current[r] for r in ("A", "B") if r in current]
    if len(names) == 1:
        ab = names[0]
    else:
        program.append(("contract", ContractStep(tuple(names), "AB", None)))
        ab = "AB"
    if "C" in current:
        program.append(("contract", ContractStep((ab, current["C"]), "result", None)))
        program.append(("output", "result"))
    else:
        program.append(("output", ab))

    return ContractionPlan(lattice.kind, cuts, tuple(program),
                           tuple(sorted(region_c)))


def grid_plan(lattice: Lattice, n_cuts: Optional[int] = None) -> ContractionPlan:
    """Balanced two-region plan for a full rectangle.

    The grid splits across its longer axis; a small bottom-right block
    becomes the batch region C, and ``n_cuts`` waist bonds (default: half
    the waist, the ones farthest from C) become cuts.
    """
    rows, cols = lattice.bounding_shape
    if lattice.n != rows * cols:
        raise PlanError(f"no grid plan for irregular lattice {lattice.kind!r}")

    def sid(r, c):
        return lattice.site_id((r, c))

    if cols >= rows:
        mid = (cols + 1) // 2
        in_a = lambda r, c: c < mid
        waist = [(sid(r, mid - 1), sid(r, mid)) for r in range(rows)]
        c_rows = range((rows + 1) // 2, rows)
        c_cols = range(max(mid, cols - 2), cols)
    else:
        mid = (rows + 1) // 2
        in_a = lambda r, c: r < mid
        waist = [(sid(mid - 1, c), sid(mid, c)) for c in range(cols)]
        c_rows = range(max(mid, rows - 2), rows)
        c_cols = range((cols + 1) // 2, cols)

    if n_cuts is None:
        n_cuts = len(waist) // 2
    if not 0 <= n_cuts <= len(waist):
        raise PlanError(f"{lattice.kind} waist has {len(waist)} bonds, "
                        f"cannot cut {n_cuts}")
    cut_bonds = waist[:n_cuts]
    region_c = {sid(r, c) for r in c_rows for c in c_cols}
    region_a = {sid(r, c) for r in range(rows) for c in range(cols)
                if in_a(r, c)} - region_c
    region_b = set(range(lattice.n)) - region_a - region_c
    return two_region_plan(lattice, region_a, region_b, region_c, cut_bonds)


_PLAN_FILES = {
    "grid:7x7": "grid_7x7.txt",
    "bristlecone-24": "bristlecone_24.txt",
    "bristlecone-48": "bristlecone_48.txt",
    "bristlecone-60": "bristlecone_60.txt",
    "bristlecone-64": "bristlecone_64.txt",
    "bristlecone-70": "bristlecone_70.txt",
    "bristlecone-72": "bristlecone_72.txt",
}


def load_plan(source) -> ContractionPlan:
    """Load a plan from a file path or a shipped plan name (lattice kind)."""
    name = str(source)
    if name in _PLAN_FILES:
        ref = resources.files("rqcsim.data.plans") / _PLAN_FILES[name]
        return parse_plan(ref.read_text())
    with open(name, "r", encoding="utf-8") as fh:
        return parse_plan(fh.read())


def builtin_plan(lattice: Lattice, depth=None,
                 memory_budget: Optional[int] = None) -> ContractionPlan:
    """The shipped plan for this lattice.

    Bristlecone lattices and the 7x7 grid use hand-tuned plan files; other
    rectangles get a generated balanced split.  When ``memory_budget`` is
    given (bytes), the plan's estimated peak live set at ``depth`` is
    checked against it; generated grid plans respond by cutting more waist
    bonds, file-based plans fail with a diagnostic instead of silently
    changing shape.
    """
    if lattice.kind in _PLAN_FILES:
        plan = load_plan(lattice.kind)
        if memory_budget is not None:
            if depth is None:
                raise ValueError("memory budgets need the circuit depth")
            est = estimate_cost(plan, lattice, depth)
            if est.peak_bytes > memory_budget:
                raise MemoryBudgetError(
                    f"plan for {lattice.kind} needs ~{est.peak_bytes} bytes at "
                    f"depth {DepthSpec.parse(depth)}, budget is {memory_budget}"
                )
        return plan

    if not lattice.kind.startswith("grid:"):
        raise PlanError(f"no builtin plan for lattice {lattice.kind!r}")
    plan = grid_plan(lattice)
    if memory_budget is None:
        return plan
    if depth is None:
        raise ValueError("memory budgets need the circuit depth")
    n_cuts = len(plan.cuts)
    while True:
        est = estimate_cost(plan, lattice, depth)
        if est.peak_bytes <= memory_budget:
            return plan
        try:
            plan = grid_plan(lattice, n_cuts=n_cuts + 1)
        except PlanError:
            raise MemoryBudgetError(
                f"even cutting the whole waist, {lattice.kind} at depth "
                f"{DepthSpec.parse(depth)} needs ~{est.peak_bytes} bytes, "
                f"budget is {memory_budget}"
            ) from None
        n_cuts += 1
