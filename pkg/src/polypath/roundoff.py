"""Straight-line programs executed under relative input and per-operation
perturbations, with the closed-form accuracy bounds for products and sums.

A run with round-off unit delta multiplies every input and every node result
by (1 + e) with |e| < delta (strictly).  The delta bounds below guarantee a
relative output error below epsilon for any such perturbation pattern; the
adversarial search mode is a randomized falsifier for those guarantees, not
a prover.

All logarithms here are natural.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import inf, log, sqrt
from typing import Sequence

import numpy as np

from .rng import as_generator

OPS = {"add", "sub", "mul", "div"}

KIND_PRODUCT = "product-n"
KIND_SUM_PAIR = "sum-pair"
KIND_SUM_NONNEG = "sum-n-nonneg"
KIND_SUM = "sum-n"
KINDS = (KIND_PRODUCT, KIND_SUM_PAIR, KIND_SUM_NONNEG, KIND_SUM)

# strictness margin: injected errors are scaled by (1 - this) in sign modes
STRICT_MARGIN = 1e-12

# sign-pattern corners are enumerated exhaustively up to this many error slots
CORNER_SLOTS = 12


class IllPosedEncounterError(ArithmeticError):
    """Division by a (perturbed) zero, or an instance on the ill-posed set."""


@dataclass(frozen=True)
class SlpNode:
    op: str
    left: int  # index into the value table (inputs first, then nodes)
    right: int


@dataclass(frozen=True)
class Slp:
    """Straight-line program over the four arithmetic operations.

    The value table holds the ``arity`` inputs followed by one slot per node;
    the last node is the output.
    """

    arity: int
    nodes: tuple[SlpNode, ...]

    def __post_init__(self):
        if self.arity < 1 or not self.nodes:
            raise ValueError("need at least one input and one node")
        for k, node in enumerate(self.nodes):
            if node.op not in OPS:
                raise ValueError(f"unknown op {node.op!r}")
            limit = self.arity + k
            if not (0 <= node.left < limit and 0 <= node.right < limit):
                raise ValueError(f"node {k} references a slot that is not yet defined")

    @property
    def n_slots(self) -> int:
        return self.arity + len(self.nodes)


@dataclass(frozen=True)
class PerturbationModel:
    delta: float
    mode: str = "random-uniform"  # random-uniform | random-sign | adversarial-search
    trials: int = 10_000

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.mode not in ("random-uniform", "random-sign", "adversarial-search"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")


@dataclass(frozen=True)
class RunTrace:
    output: float
    node_values: tuple[float, ...]
    T: int
    cost: float
    delta: float
    rel_error: float | None = None


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

_LINE = re.compile(r"^n(\d+)\s*=\s*(add|sub|mul|div)\s+(x\d+|n\d+)\s+(x\d+|n\d+)$")


def parse_slp(text: str) -> Slp:
    """Parse the one-node-per-line format, e.g. ``n0 = mul x0 x1``.

    Inputs are x0, x1, ...; the arity is one more than the largest input
    index used.  Lines starting with '#' and blank lines are skipped.
    """
    nodes = []
    max_input = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: cannot parse {line!r}")
        k, op, a, b = int(m.group(1)), m.group(2), m.group(3), m.group(4)
        if k != len(nodes):
            raise ValueError(f"line {lineno}: expected node n{len(nodes)}, got n{k}")
        refs = []
        for token in (a, b):
            idx = int(token[1:])
            if token[0] == "x":
                max_input = max(max_input, idx)
                refs.append(("x", idx))
            else:
                if idx >= len(nodes):
                    raise ValueError(f"line {lineno}: n{idx} used before definition")
                refs.append(("n", idx))
        nodes.append((op, refs))
    if not nodes:
        raise ValueError("program has no nodes")
    arity = max_input + 1
    if arity < 1:
        raise ValueError("program reads no inputs")
    resolved = tuple(
        SlpNode(op, *(idx if tag == "x" else arity + idx for tag, idx in refs))
        for op, refs in nodes
    )
    return Slp(arity, resolved)


def format_slp(slp: Slp) -> str:
    lines = []
    for k, node in enumerate(slp.nodes):
        refs = []
        for idx in (node.left, node.right):
            refs.append(f"x{idx}" if idx < slp.arity else f"n{idx - slp.arity}")
        lines.append(f"n{k} = {node.op} {refs[0]} {refs[1]}")
    return "\n".join(lines) + "\n"


# program builders used by the accuracy-bound checks

def product_slp(n: int) -> Slp:
    """x0 * x1 * ... * x_{n-1}, left to right."""
    if n < 2:
        raise ValueError("need n >= 2")
    nodes = [SlpNode("mul", 0, 1)]
    for i in range(2, n):
        nodes.append(SlpNode("mul", n + i - 2, i))
    return Slp(n, tuple(nodes))


def chain_sum_slp(n: int) -> Slp:
    """x0 + x1 + ... + x_{n-1}, left to right."""
    if n < 2:
        raise ValueError("need n >= 2")
    nodes = [SlpNode("add", 0, 1)]
    for i in range(2, n):
        nodes.append(SlpNode("add", n + i - 2, i))
    return Slp(n, tuple(nodes))


def split_sum_slp(x: Sequence[float]) -> Slp:
    """Sum the nonnegative entries, sum the negative ones, then combine.

    This is the machine whose round-off bound for mixed-sign sums holds; the
    split depends on the signs of the concrete input.
    """
    x = list(x)
    n = len(x)
    if n < 2:
        raise ValueError("need n >= 2")
    pos = [i for i, v in enumerate(x) if v >= 0]
    neg = [i for i, v in enumerate(x) if v < 0]
    if not pos or not neg:
        return chain_sum_slp(n)
    nodes: list[SlpNode] = []

    def chain(idxs):
        if len(idxs) == 1:
            return idxs[0]
        acc = idxs[0]
        for i in idxs[1:]:
            nodes.append(SlpNode("add", acc, i))
            acc = n + len(nodes) - 1
        return acc

    p = chain(pos)
    q = chain(neg)
    nodes.append(SlpNode("add", p, q))
    return Slp(n, tuple(nodes))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _eval_batch(slp: Slp, x: np.ndarray, errs: np.ndarray) -> np.ndarray:
    """Evaluate under perturbations; errs has shape (trials, n_slots).

    Returns the full value table, shape (n_slots, trials).  Raises on any
    division by a perturbed zero.
    """
    trials = errs.shape[0]
    vals = np.empty((slp.n_slots, trials), dtype=float)
    for i in range(slp.arity):
        vals[i] = x[i] * (1.0 + errs[:, i])
    for k, node in enumerate(slp.nodes):
        a = vals[node.left]
        b = vals[node.right]
        if node.op == "add":
            r = a + b
        elif node.op == "sub":
            r = a - b
        elif node.op == "mul":
            r = a * b
        else:
            if np.any(b == 0.0):
                raise IllPosedEncounterError("division by a perturbed zero")
            r = a / b
        vals[slp.arity + k] = r * (1.0 + errs[:, slp.arity + k])
    return vals


def ht(x) -> float:
    """Height of a scalar or vector: 1 + ln(1 + |ln|x||), with ht(0) = 1.

    For a vector the height is n times the largest component height.
    """
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("empty input")
    hts = np.where(arr == 0.0, 1.0, 1.0 + np.log1p(np.abs(np.log(np.abs(np.where(arr == 0, 1.0, arr))))))
    if np.ndim(x) == 0:
        return float(hts[0])
    return float(arr.size * np.max(hts))


def _trace_cost(x_pert: np.ndarray, node_vals: np.ndarray, delta: float) -> float:
    """T * (max_i ht(y^(i)) + |ln delta|) over the growing state vectors."""
    T = node_vals.shape[0]
    if delta <= 0.0:
        return inf
    max_ht = ht(x_pert)
    state = list(x_pert)
    for v in node_vals:
        state.append(v)
        max_ht = max(max_ht, ht(np.array(state)))
    return float(T * (max_ht + abs(log(delta))))


def run_exact(slp: Slp, x) -> RunTrace:
    """Run without any perturbation (delta = 0; infinite cost by convention)."""
    return run_perturbed(slp, x, PerturbationModel(0.0, "random-uniform"), seed=0)


def run_perturbed(slp: Slp, x, model: PerturbationModel, seed) -> RunTrace:
    """Execute the program under the perturbation model.

    The exact (delta = 0) trace must not divide by zero.  In adversarial
    mode, ``model.trials`` random magnitude patterns plus exhaustive sign
    corners (when the program has at most 12 error slots) are run and the
    trace of the worst relative output error is returned, with that error in
    ``rel_error``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != slp.arity:
        raise ValueError(f"expected {slp.arity} inputs, got {x.shape[0]}")
    rng = as_generator(seed)
    slots = slp.n_slots
    exact_vals = _eval_batch(slp, x, np.zeros((1, slots)))
    exact = float(exact_vals[-1, 0])
    delta = model.delta

    def trace_from(errs_row: np.ndarray, rel: float | None) -> RunTrace:
        vals = _eval_batch(slp, x, errs_row[None, :])[:, 0]
        return RunTrace(
            output=float(vals[-1]),
            node_values=tuple(float(v) for v in vals[slp.arity:]),
            T=len(slp.nodes),
            cost=_trace_cost(vals[: slp.arity], vals[slp.arity:], delta),
            delta=delta,
            rel_error=rel,
        )

    if delta == 0.0:
        return trace_from(np.zeros(slots), 0.0)

    if model.mode == "random-uniform":
        errs = rng.uniform(-delta, delta, slots)
        return trace_from(errs, None)
    if model.mode == "random-sign":
        signs = rng.choice([-1.0, 1.0], slots)
        return trace_from(signs * delta * (1.0 - STRICT_MARGIN), None)

    # adversarial search
    blocks = [rng.uniform(-delta, delta, (model.trials, slots))]
    if slots <= CORNER_SLOTS:
        corners = np.array(
            np.meshgrid(*([[-1.0, 1.0]] * slots), indexing="ij")
        ).reshape(slots, -1).T
        blocks.append(corners * delta * (1.0 - STRICT_MARGIN))
    errs = np.vstack(blocks)
    outs = _eval_batch(slp, x, errs)[-1]
    if exact == 0.0:
        rels = np.where(outs == 0.0, 0.0, inf)
    else:
        rels = np.abs(outs - exact) / abs(exact)
    worst = int(np.argmax(rels))
    return trace_from(errs[worst], float(rels[worst]))


# ---------------------------------------------------------------------------
# Accuracy bounds and condition measures
# ---------------------------------------------------------------------------

def _as_floats(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ValueError("empty input")
    return arr


def delta_bound(kind: str, x, epsilon: float) -> float:
    """Round-off unit guaranteeing relative output error below epsilon.

    product-n      : epsilon / (4n - 2)
    sum-pair       : |x+y| epsilon / (3 sqrt2 sqrt(x^2 + y^2))
    sum-n-nonneg   : epsilon / (2n), all inputs nonnegative
    sum-n          : |sum x| epsilon / (6 sqrt2 n^{3/2} sqrt(sum x^2)),
                     for the machine that sums the nonnegative and negative
                     parts separately
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    x = _as_floats(x)
    n = x.size
    if kind == KIND_PRODUCT:
        return epsilon / (4 * n - 2)
    if kind == KIND_SUM_PAIR:
        if n != 2:
            raise ValueError("sum-pair needs exactly two inputs")
        s = x.sum()
        if s == 0.0:
            raise IllPosedEncounterError("x + y = 0 is ill posed")
        return abs(s) * epsilon / (3 * sqrt(2) * sqrt((x ** 2).sum()))
    if kind == KIND_SUM_NONNEG:
        if np.any(x < 0):
            raise ValueError("sum-n-nonneg needs nonnegative inputs")
        if x.sum() == 0.0:
            raise IllPosedEncounterError("zero sum is ill posed")
        return epsilon / (2 * n)
    if kind == KIND_SUM:
        s = x.sum()
        if s == 0.0:
            raise IllPosedEncounterError("zero sum is ill posed")
        return abs(s) * epsilon / (6 * sqrt(2) * n ** 1.5 * sqrt((x ** 2).sum()))
    raise ValueError(f"unknown kind {kind!r}")


def kappa(kind: str, x) -> float:
    """Componentwise condition number of the product or sum map."""
    x = _as_floats(x)
    if kind == KIND_PRODUCT:
        if np.any(x == 0.0):
            return inf
        return float(sqrt((x ** 2).sum()) * sqrt((1.0 / x ** 2).sum()))
    if kind in (KIND_SUM, KIND_SUM_PAIR, KIND_SUM_NONNEG):
        s = x.sum()
        if s == 0.0:
            return inf
        return float(sqrt(x.size) * sqrt((x ** 2).sum()) / abs(s))
    raise ValueError(f"unknown kind {kind!r}")


def posedness(kind: str, x) -> float:
    """Relative distance to the ill-posed set."""
    x = _as_floats(x)
    nrm = sqrt((x ** 2).sum())
    if nrm == 0.0:
        return 0.0
    if kind == KIND_PRODUCT:
        return float(np.min(np.abs(x)) / nrm)
    if kind in (KIND_SUM, KIND_SUM_PAIR, KIND_SUM_NONNEG):
        return float(abs(x.sum()) / (sqrt(x.size) * nrm))
    raise ValueError(f"unknown kind {kind!r}")


def K(kind: str, x) -> float:
    """max(kappa, 1/posedness)."""
    p = posedness(kind, x)
    inv_p = inf if p == 0.0 else 1.0 / p
    return max(kappa(kind, x), inv_p)


def input_size(x, epsilon: float, K_value: float) -> float:
    """ht(x) + |ln epsilon| + ln(K + 1)."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return float(ht(x) + abs(log(epsilon)) + log(K_value + 1.0))


def sandwich_check(u: float, n: int) -> bool:
    """|(1 + u/n)^n - 1| <= 2|u| for |u| <= 1, n >= 1."""
    if abs(u) > 1 or n < 1:
        raise ValueError("need |u| <= 1 and n >= 1")
    return abs((1.0 + u / n) ** n - 1.0) <= 2.0 * abs(u)


def single_precision_exponents(kind: str = KIND_PRODUCT) -> dict:
    """Report-only classification of the delta bound's shape.

    For the product, delta/epsilon is independent of the input and decays
    like 1/n: exponent 0 in the condition measure and 1 in the dimension.
    """
    if kind != KIND_PRODUCT:
        raise ValueError("classification is reported for the product map only")
    return {"condition_exponent": 0, "dimension_exponent": 1}
