"""Robust semantics as a signal-to-signal operator.

The robustness of a formula is computed bottom-up over the AST: atoms are
kernel correlations, boolean connectives are pointwise min/max, and the
temporal operators are sliding-window extrema over ``[t-b, t-a]`` (computed
in amortized O(N) with a monotone deque).  ``since`` follows the bounded
recursion max over t' of min(rho2(t'), min over (t', t] of rho1).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (
    GridMismatch,
    SignalTooShortForFormula,
    UnknownAtom,
    WindowLargerThanSignal,
)
from .logic import (
    And,
    Atom,
    Formula,
    Hist,
    Interval,
    KernelTable,
    Not,
    Once,
    Since,
    TrueFormula,
    Or,
    _window_offsets,
)
from .signals import Signal, align_signals, correlate


@dataclass(frozen=True)
class RobustnessSignal:
    """Robustness values on the sub-domain where every window fits."""

    signal: Signal
    valid_domain: tuple[float, float]

    @property
    def t0(self) -> float:
        return self.signal.t0

    @property
    def dt(self) -> float:
        return self.signal.dt

    @property
    def samples(self) -> np.ndarray:
        return self.signal.samples

    @property
    def times(self) -> np.ndarray:
        return self.signal.times

    def at(self, t: float) -> float:
        return float(self.signal.samples[self.signal.index_of(t)])


def temporal_depth(phi: Formula) -> float:
    """Sum of upper interval bounds along the deepest temporal path."""
    if isinstance(phi, (TrueFormula, Atom)):
        return 0.0
    if isinstance(phi, Not):
        return temporal_depth(phi.child)
    if isinstance(phi, (And, Or)):
        return max(temporal_depth(phi.left), temporal_depth(phi.right))
    if isinstance(phi, (Once, Hist)):
        return phi.interval.hi + temporal_depth(phi.child)
    if isinstance(phi, Since):
        return phi.interval.hi + max(temporal_depth(phi.left),
                                     temporal_depth(phi.right))
    raise TypeError(f"not a formula: {phi!r}")


def max_truncation(phi: Formula, kt: KernelTable) -> float:
    """Largest kernel support half-width among the formula's atoms."""
    radii = [0.0]

    def walk(node: Formula) -> None:
        if isinstance(node, Atom):
            if node.name not in kt:
                raise UnknownAtom(f"atom {node.name!r} not in kernel table")
            radii.append(kt[node.name].radius)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or, Since)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (Once, Hist)):
            walk(node.child)

    walk(phi)
    return max(radii)


def valid_domain(phi: Formula, input_domain: tuple[float, float],
                 kt: KernelTable) -> tuple[float, float]:
    """Time span on which the robustness of ``phi`` is computable."""
    trunc = max_truncation(phi, kt)
    lo = input_domain[0] + temporal_depth(phi) + trunc
    hi = input_domain[1] - trunc
    if hi <= lo:
        raise SignalTooShortForFormula(
            f"signal of duration {input_domain[1] - input_domain[0]} too "
            f"short for temporal depth {temporal_depth(phi)} plus kernel "
            f"radius {trunc}")
    return (lo, hi)


# ---------------------------------------------------------------------------
# Sliding-window extrema
# ---------------------------------------------------------------------------

def sliding_extremum(u: Signal, interval: Interval | tuple[float, float],
                     mode: str) -> Signal:
    """y(t) = extremum of ``u`` over ``[t-b, t-a]`` via a monotone deque.

    Produces exactly the same values as a brute-force scan of the window
    (the algorithm only moves sample values around, never combines them).
    """
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    oa, ob = _window_offsets(interval, u.dt)
    from .logic import _check_window
    _check_window(oa, ob, interval, u)
    x = u.samples
    n = len(x)
    if n - ob < 2:
        raise WindowLargerThanSignal(
            f"window {interval} leaves fewer than two output samples")
    out = np.empty(n - ob)
    keep_newer = (np.greater_equal if mode == "max" else np.less_equal)
    dq: deque[int] = deque()
    # Window at output k (input index k+ob) covers input [k, k+ob-oa].
    for j in range(0, ob - oa):
        while dq and keep_newer(x[j], x[dq[-1]]):
            dq.pop()
        dq.append(j)
    for k in range(0, n - ob):
        j = k + ob - oa
        while dq and keep_newer(x[j], x[dq[-1]]):
            dq.pop()
        dq.append(j)
        if dq[0] < k:
            dq.popleft()
        out[k] = x[dq[0]]
    return Signal(u.t0 + ob * u.dt, u.dt, out)


def since_robustness(rho1: Signal, rho2: Signal,
                     interval: Interval | tuple[float, float]) -> Signal:
    """Bounded-since recursion over two robustness signals.

    For each t: max over grid t' in [t-b, t-a] of
    min(rho2(t'), min over grid t'' in (t', t] of rho1(t'')).  An empty
    inner window (t' == t) contributes +inf so rho2 governs the value.
    """
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    if not rho1.same_grid(rho2):
        raise GridMismatch("since operands are not on a common grid")
    u, v = align_signals(rho1, rho2)
    oa, ob = _window_offsets(interval, u.dt)
    from .logic import _check_window
    _check_window(oa, ob, interval, u)
    r1 = u.samples
    r2 = v.samples
    n = len(r1)
    if n - ob < 2:
        raise WindowLargerThanSignal(
            f"window {interval} leaves fewer than two output samples")
    out = np.empty(n - ob)
    for k in range(ob, n):
        lo, hi = k - ob, k - oa
        # inner[j - lo] = min of r1 over (j, k]; +inf when the slice is empty
        inner = np.full(hi - lo + 1, np.inf)
        tail = r1[lo + 1: k + 1]
        if tail.size:
            suffix = np.minimum.accumulate(tail[::-1])[::-1]
            m = min(hi, k - 1)
            inner[: m - lo + 1] = suffix[: m - lo + 1]
        out[k - ob] = np.max(np.minimum(r2[lo: hi + 1], inner))
    return Signal(u.t0 + ob * u.dt, u.dt, out)


# ---------------------------------------------------------------------------
# Robustness of a formula
# ---------------------------------------------------------------------------

def _robustness_signal(phi: Formula, x: Signal, kt: KernelTable) -> Signal:
    if isinstance(phi, TrueFormula):
        return x.with_samples(np.full(len(x), np.inf))
    if isinstance(phi, Atom):
        if phi.name not in kt:
            raise UnknownAtom(f"atom {phi.name!r} not in kernel table")
        return correlate(kt[phi.name], x)
    if isinstance(phi, Not):
        u = _robustness_signal(phi.child, x, kt)
        return u.with_samples(-u.samples)
    if isinstance(phi, (And, Or)):
        u, v = align_signals(_robustness_signal(phi.left, x, kt),
                             _robustness_signal(phi.right, x, kt))
        op = np.minimum if isinstance(phi, And) else np.maximum
        return u.with_samples(op(u.samples, v.samples))
    if isinstance(phi, Once):
        return sliding_extremum(_robustness_signal(phi.child, x, kt),
                                phi.interval, "max")
    if isinstance(phi, Hist):
        return sliding_extremum(_robustness_signal(phi.child, x, kt),
                                phi.interval, "min")
    if isinstance(phi, Since):
        return since_robustness(_robustness_signal(phi.left, x, kt),
                                _robustness_signal(phi.right, x, kt),
                                phi.interval)
    raise TypeError(f"not a formula: {phi!r}")


def robustness(phi: Formula, x: Signal, kt: KernelTable) -> RobustnessSignal:
    """Robustness signal of ``phi`` over ``x`` on its valid domain."""
    valid_domain(phi, (x.t0, x.t_end), kt)   # raises if too short
    try:
        sig = _robustness_signal(phi, x, kt)
    except (WindowLargerThanSignal,) as exc:
        raise SignalTooShortForFormula(str(exc)) from exc
    return RobustnessSignal(sig, (sig.t0, sig.t_end))


def save_robustness_csv(rho: RobustnessSignal, path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "rho"])
        for t, v in zip(rho.times, rho.samples):
            writer.writerow([repr(float(t)), repr(float(v))])


def save_verdict_csv(rho: RobustnessSignal, path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "sat"])
        for t, v in zip(rho.times, rho.samples):
            writer.writerow([repr(float(t)), 1 if v >= 0 else 0])
