"""GFRF algebra: sums, operator composition and the formula pipeline.

Composition of factored exponential-sum GFRFs stays in closed form: an
outer delta-train term of order k combines with one inner term per block
of a composition of n into k positive parts; block j shifts its inner
delays by the outer delay c_j and carries the inner factors through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    BadArity,
    InnerHasNonzeroH0,
    OuterHasAtomFactors,
    SinceNotGfrfSupported,
    SinceSamplingDisabled,
    TrueNotApproximable,
    UnknownAtom,
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
    Or,
    Since,
    TrueFormula,
)
from .volterra import (
    UNITY,
    FitConfig,
    Gfrf,
    GfrfTerm,
    MemorylessNode,
    NegNode,
    OperatorPipeline,
    PolyDelayNode,
    PolyDelayOperator,
    SeparableFit,
    SumNode,
    atom_volterra,
    fit_poly_delay,
    fit_separable_minmax,
    memoryless_poly_gfrf,
    negation_volterra,
    poly_delay_to_gfrf,
)


def compositions(n: int, k: int) -> list[tuple[int, ...]]:
    """Length-k sequences of positive integers summing to n, lex order.

    Zero parts are excluded: inner operators in this pipeline always have
    H_0 = 0, so any term with a zero part vanishes.
    """
    if k < 1 or k > n:
        raise BadArity(f"need 1 <= k <= n, got k={k}, n={n}")
    out: list[tuple[int, ...]] = []

    def rec(prefix: list[int], remaining: int, slots: int) -> None:
        if slots == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for m in range(1, remaining - slots + 2):
            rec(prefix + [m], remaining - m, slots - 1)

    rec([], n, k)
    return out


def sum_gfrf(g1: Gfrf, g2: Gfrf) -> Gfrf:
    """Order-wise sum of two responses (term lists concatenate)."""
    orders: dict[int, list[GfrfTerm]] = {}
    for g in (g1, g2):
        for n, terms in g.orders.items():
            orders.setdefault(n, []).extend(terms)
    return Gfrf(g1.h0 + g2.h0, orders, _merge_atoms(g1, g2))


def _merge_atoms(g1: Gfrf, g2: Gfrf) -> dict:
    atoms = dict(g1.atoms)
    for name, kernel in g2.atoms.items():
        if name in atoms and atoms[name] is not kernel and atoms[name] != kernel:
            raise UnknownAtom(f"atom name {name!r} bound to two kernels")
        atoms[name] = kernel
    return atoms


def compose_gfrf(outer: Gfrf, inner: Gfrf, max_order: int = 4) -> Gfrf:
    """Closed-form GFRF of outer after inner, up to ``max_order``.

    The outer operator must be a delta train (unity factors only) and the
    inner must have zero H_0; both hold for every operator produced by the
    formula pipeline.  H_0 of the result is the outer H_0.
    """
    for terms in outer.orders.values():
        for term in terms:
            if any(f != UNITY for f in term.factors):
                raise OuterHasAtomFactors(
                    "outer operator carries atom factors; composition is "
                    "closed only over delta-train outers")
    if abs(inner.h0) > 1e-12:
        raise InnerHasNonzeroH0(f"inner H_0 = {inner.h0} must be 0")

    inner_orders = {n: t for n, t in inner.orders.items() if t}
    result: dict[int, list[GfrfTerm]] = {}
    for n in range(1, max_order + 1):
        acc: list[GfrfTerm] = []
        for k, outer_terms in outer.orders.items():
            if k < 1 or k > n or not outer_terms:
                continue
            for parts in compositions(n, k):
                pools = [inner_orders.get(m) for m in parts]
                if any(p is None for p in pools):
                    continue
                for outer_term in outer_terms:
                    _emit(acc, outer_term, parts, pools)
        if acc:
            result[n] = acc
    g = Gfrf(outer.h0, result, _merge_atoms(outer, inner))
    return merge_terms(g)


def _emit(acc: list[GfrfTerm], outer_term: GfrfTerm,
          parts: tuple[int, ...], pools: list[list[GfrfTerm]]) -> None:
    """Emit composed terms for one outer term and one block structure."""
    stack = [(0, outer_term.coeff, (), ())]
    while stack:
        j, coeff, delays, factors = stack.pop()
        if j == len(parts):
            acc.append(GfrfTerm(coeff, delays, factors))
            continue
        c_j = outer_term.delays[j]
        for t in pools[j]:
            stack.append((
                j + 1,
                coeff * t.coeff,
                delays + tuple(c_j + a for a in t.delays),
                factors + t.factors,
            ))


def merge_terms(g: Gfrf, round_digits: int = 12) -> Gfrf:
    """Combine terms with identical delay/factor signatures."""
    orders: dict[int, list[GfrfTerm]] = {}
    for n, terms in g.orders.items():
        bucket: dict[tuple, list] = {}
        for t in terms:
            key = (tuple(round(d, round_digits) for d in t.delays), t.factors)
            if key in bucket:
                bucket[key][0] += t.coeff
            else:
                # keep the first term's exact delays as the representative
                bucket[key] = [t.coeff, t.delays]
        merged = [GfrfTerm(c, delays, f)
                  for (_, f), (c, delays) in sorted(bucket.items())
                  if c != 0.0]
        if merged:
            orders[n] = merged
    return Gfrf(g.h0, orders, dict(g.atoms))


def symmetrize_gfrf(g: Gfrf) -> Gfrf:
    """Average each order over all frequency-slot permutations.

    The stored responses are asymmetric (slot order follows the delay
    expansion); the symmetrized version evaluates identically inside
    output-spectrum sums and plots like the symmetric convention.
    """
    import itertools
    import math as _math
    orders: dict[int, list[GfrfTerm]] = {}
    for n, terms in g.orders.items():
        sym: list[GfrfTerm] = []
        weight = 1.0 / _math.factorial(n)
        for t in terms:
            for perm in itertools.permutations(range(n)):
                sym.append(GfrfTerm(t.coeff * weight,
                                    tuple(t.delays[i] for i in perm),
                                    tuple(t.factors[i] for i in perm)))
        orders[n] = sym
    return merge_terms(Gfrf(g.h0, orders, dict(g.atoms)))


def prune_gfrf(g: Gfrf, threshold: float) -> tuple[Gfrf, float]:
    """Merge identical terms, then drop |coeff| < threshold.

    Returns the pruned response and the dropped coefficient mass, which
    bounds the evaluation change at any frequency tuple for unit-bounded
    factors.
    """
    if threshold < 0:
        raise BadArity("prune threshold must be >= 0")
    merged = merge_terms(g)
    dropped = 0.0
    orders: dict[int, list[GfrfTerm]] = {}
    for n, terms in merged.orders.items():
        kept = []
        for t in terms:
            if abs(t.coeff) < threshold:
                dropped += abs(t.coeff)
            else:
                kept.append(t)
        if kept:
            orders[n] = kept
    return Gfrf(merged.h0, orders, dict(merged.atoms)), dropped


# ---------------------------------------------------------------------------
# Formula pipeline
# ---------------------------------------------------------------------------

_FIT_CACHE: dict[tuple, object] = {}


def clear_fit_cache() -> None:
    _FIT_CACHE.clear()


def cached_poly_fit(op: str, interval: Interval,
                    cfg: FitConfig) -> PolyDelayOperator:
    key = ("poly", op, round(interval.lo, 12), round(interval.hi, 12), cfg)
    if key not in _FIT_CACHE:
        _FIT_CACHE[key] = fit_poly_delay(op, interval, cfg)
    return _FIT_CACHE[key]


def cached_separable_fit(mode: str, cfg: FitConfig) -> SeparableFit:
    key = ("sep", mode, cfg.degree, cfg)
    if key not in _FIT_CACHE:
        _FIT_CACHE[key] = fit_separable_minmax(mode, cfg.degree, cfg)
    return _FIT_CACHE[key]


@dataclass
class BuildReport:
    fit_residuals: dict[str, float] = field(default_factory=dict)
    dropped_mass: float = 0.0
    term_counts: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "term_counts_per_order": {str(k): v
                                      for k, v in sorted(self.term_counts.items())},
            "dropped_mass": self.dropped_mass,
            "fit_residuals": dict(sorted(self.fit_residuals.items())),
        }


@dataclass
class FormulaOperator:
    """Frequency response plus its time-domain twin for one formula."""

    gfrf: Gfrf
    pipeline: OperatorPipeline
    report: BuildReport


def build_formula_operator(phi: Formula, kt: KernelTable,
                           cfg: FitConfig | None = None,
                           prune_threshold: float = 0.0) -> FormulaOperator:
    """Recursive formula -> (GFRF, pipeline) construction.

    Atoms map to their exact first-order response; once/hist to fitted
    polynomial-delay operators composed over the child; and/or to the
    separable min/max polynomials applied to each child and summed.
    ``since`` and explicit ``true`` are rejected.
    """
    if cfg is None:
        cfg = FitConfig()
    report = BuildReport()

    def rec(node: Formula) -> tuple[Gfrf, OperatorPipeline]:
        if isinstance(node, TrueFormula):
            raise TrueNotApproximable(
                "explicit 'true' has no finite Volterra approximation")
        if isinstance(node, Since):
            raise SinceNotGfrfSupported(
                "'since' is not supported by the direct pipeline; use "
                "operator-space sampling (since_sampled_gfrf)")
        if isinstance(node, Atom):
            if node.name not in kt:
                raise UnknownAtom(f"atom {node.name!r} not in kernel table")
            return atom_volterra(kt[node.name], node.name)
        if isinstance(node, Not):
            g, p = rec(node.child)
            return (compose_gfrf(negation_volterra(), g, cfg.max_order),
                    NegNode(p))
        if isinstance(node, (Once, Hist)):
            g, p = rec(node.child)
            op = "once" if isinstance(node, Once) else "hist"
            fit = cached_poly_fit(op, node.interval, cfg)
            if fit.diagnostics is not None:
                report.fit_residuals[f"{op}{node.interval}"] = \
                    fit.diagnostics.rms_residual
            composed = compose_gfrf(poly_delay_to_gfrf(fit), g, cfg.max_order)
            composed, dropped = prune_gfrf(composed, prune_threshold)
            report.dropped_mass += dropped
            return composed, PolyDelayNode(fit, p)
        if isinstance(node, (And, Or)):
            g1, p1 = rec(node.left)
            g2, p2 = rec(node.right)
            mode = "min" if isinstance(node, And) else "max"
            fit = cached_separable_fit(mode, cfg)
            report.fit_residuals[f"{mode}(deg {cfg.degree})"] = \
                fit.rms_residual
            left = compose_gfrf(memoryless_poly_gfrf(fit.r), g1,
                                cfg.max_order)
            right = compose_gfrf(memoryless_poly_gfrf(fit.q), g2,
                                 cfg.max_order)
            combined, dropped = prune_gfrf(sum_gfrf(left, right),
                                           prune_threshold)
            report.dropped_mass += dropped
            return combined, SumNode((MemorylessNode(fit.r, p1),
                                      MemorylessNode(fit.q, p2)))
        raise TypeError(f"not a formula: {node!r}")

    gfrf, pipeline = rec(phi)
    report.term_counts = gfrf.term_counts()
    return FormulaOperator(gfrf, pipeline, report)


def formula_to_gfrf(phi: Formula, kt: KernelTable,
                    cfg: FitConfig | None = None,
                    prune_threshold: float = 0.0) -> Gfrf:
    return build_formula_operator(phi, kt, cfg, prune_threshold).gfrf


# ---------------------------------------------------------------------------
# Sampled approximation of since
# ---------------------------------------------------------------------------

@dataclass
class SinceSample:
    eta: float
    formula: Formula
    gfrf: Gfrf
    pipeline: OperatorPipeline


def since_sampled_gfrf(phi1: Formula, phi2: Formula,
                       interval: Interval | tuple[float, float],
                       num_samples: int, kt: KernelTable,
                       cfg: FitConfig | None = None,
                       enabled: bool = False) -> list[SinceSample]:
    """Operator-space sampling of ``phi1 since[a,b] phi2``.

    For each of ``num_samples`` evenly spaced eta in [0, b-a], the punctual
    instance at lag a+eta decomposes into
    ``once[a+eta,a+eta] phi2 and hist[0,a+eta] phi1`` (upper bound closed,
    following the grid convention); the caller recovers an approximation of
    the since robustness as the pointwise time-domain max over eta.

    This is an explicit opt-in (``enabled=True``): it samples the operator
    space rather than approximating the since operator itself.
    """
    if not enabled:
        raise SinceSamplingDisabled(
            "operator-space sampling of 'since' must be explicitly enabled")
    if num_samples < 1:
        raise BadArity("num_samples must be >= 1")
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    if cfg is None:
        cfg = FitConfig()
    width = interval.hi - interval.lo
    etas = [0.0] if num_samples == 1 else \
        [width * i / (num_samples - 1) for i in range(num_samples)]
    out = []
    for eta in etas:
        # punctual lags snap to the sampling grid so the one-point window
        # of once[lag,lag] lands on an actual sample
        lag = round((interval.lo + eta) / cfg.dt) * cfg.dt
        phi = And(Once(Interval(lag, lag), phi2),
                  Hist(Interval(0.0, lag), phi1))
        built = build_formula_operator(phi, kt, cfg)
        out.append(SinceSample(eta, phi, built.gfrf, built.pipeline))
    return out
