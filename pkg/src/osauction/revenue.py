"""Expected revenue: exact closed forms on the piecewise-linear representation,
seeded Monte Carlo, worst cases over the ambiguity set, reserve optimization,
and the bounds that hold uniformly over the number of bidders.

Between knots every component CDF is linear, so order-statistic survival
curves are polynomials of degree <= n per segment; tail integrals use
Gauss-Legendre with enough nodes to be exact for that degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mech as M
from .dist import Dist, monopoly_price, is_regular_above_reserve, virtual_values
from .orderstat import (
    AmbiguitySpec,
    ProductDist,
    consistent_iid,
    iid,
    order_stat_cdf,
    poisson_binomial_pmf,
)


class NotSeparableError(ValueError):
    """Raised when a robust worst-case evaluation is requested for a
    mechanism whose revenue is not separable across top order statistics.
    Evaluating such a mechanism at the consistent i.i.d. point would
    overstate its guarantee."""


@dataclass(frozen=True)
class RevenueReport:
    mechanism: str
    distribution: str
    expected_revenue: float
    method: str  # "closed-form" | "monte-carlo"
    mc_stderr: float | None = None
    samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.method == "monte-carlo":
            if self.mc_stderr is None or self.samples is None or self.seed is None:
                raise ValueError("monte-carlo reports need stderr, samples and seed")
        elif self.method == "closed-form":
            if self.mc_stderr is not None or self.samples is not None:
                raise ValueError("closed-form reports carry no sampling fields")
        else:
            raise ValueError(f"unknown method {self.method!r}")

    def as_row(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "distribution": self.distribution,
            "method": self.method,
            "expected_revenue": self.expected_revenue,
            "mc_stderr": self.mc_stderr,
            "samples": self.samples,
            "seed": self.seed,
        }


# -- exact building blocks ----------------------------------------------------


def _survival_integral(d: Dist, lo: float) -> float:
    """Exact integral of Pr(value > t) over [lo, support_hi]; the survival is
    piecewise linear between knots so trapezoids are exact."""
    hi = d.support_hi
    if lo >= hi:
        return 0.0
    xs = np.unique(np.concatenate([[lo], d.xs[d.xs > lo]]))
    s_hi = 1.0 - d.cdf_left(xs[1:])
    s_lo = 1.0 - d.cdf(xs[:-1])
    return float(np.sum(0.5 * (s_hi + s_lo) * np.diff(xs)))


class _OrderStatTail:
    """Precomputed exact integrals of Pr(v_(j) > t) for a product distribution."""

    def __init__(self, pd: ProductDist, j: int):
        self.pd = pd
        self.j = j
        self.knots = pd.merged_knots()
        n = pd.n
        nodes = max(1, (n + 2) // 2)  # exact for polynomial degree n
        x, w = np.polynomial.legendre.leggauss(nodes)
        self._gx, self._gw = x, w
        a, b = self.knots[:-1], self.knots[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[:, None] + half[:, None] * x[None, :]
        sf = 1.0 - order_stat_cdf(pd, j, pts.ravel())
        sf = sf.reshape(pts.shape)
        seg = (sf * w[None, :]).sum(axis=1) * half
        suffix = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        self._suffix = suffix

    def integral_from(self, lo: float) -> float:
        k = self.knots
        if lo >= k[-1]:
            return 0.0
        if lo <= k[0]:
            # below every support the order statistic exceeds t surely
            return float(k[0] - lo) + float(self._suffix[0])
        i = int(np.searchsorted(k, lo, side="right") - 1)
        a, b = max(lo, k[i]), k[i + 1]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid + half * self._gx
        sf = 1.0 - order_stat_cdf(self.pd, self.j, pts)
        partial = float(np.sum(sf * self._gw) * half)
        return partial + float(self._suffix[i + 1])


def _top_orderstat_survivals(pd: ProductDist, r: float, j_max: int) -> np.ndarray:
    """Pr(v_(j) >= r) for j = 1..j_max from one Poisson-binomial pass."""
    x = np.array([c.survival_left(r) for c in pd.components])
    pmf = poisson_binomial_pmf(x)
    cdf = np.cumsum(pmf)
    return np.array([1.0 - cdf[j - 1] for j in range(1, j_max + 1)])


def pp_expected_revenue(price: float, pd: ProductDist) -> float:
    """price * Pr(max value >= price), exact from the component CDFs."""
    if price < 0:
        raise ValueError("price must be non-negative")
    no_buyer = np.prod([c.cdf_left(price) for c in pd.components])
    return float(price * (1.0 - no_buyer))


def spa_expected_revenue(reserve: float, pd: ProductDist) -> float:
    """reserve * Pr(v_(1) >= reserve) + integral of Pr(v_(2) > t) above the
    reserve; both pieces exact on the representation."""
    if reserve < 0:
        raise ValueError("reserve must be non-negative")
    hit = 1.0 - np.prod([c.cdf_left(reserve) for c in pd.components])
    return float(reserve * hit + _OrderStatTail(pd, 2).integral_from(reserve))


def multiunit_expected_revenue(units: int, reserve: float, pd: ProductDist) -> float:
    if units >= pd.n:
        raise ValueError("need more bidders than units")
    sv = _top_orderstat_survivals(pd, reserve, units)
    tail = _OrderStatTail(pd, units + 1).integral_from(reserve)
    return float(reserve * sv.sum() + units * tail)


def laddered_expected_revenue(click_rates, reserve: float, pd: ProductDist) -> float:
    rates = tuple(click_rates) + (0.0,)
    k = len(click_rates)
    j_max = min(k, pd.n)
    sv = _top_orderstat_survivals(pd, reserve, j_max)
    total = sum(rates[i - 1] * reserve * sv[i - 1] for i in range(1, j_max + 1))
    for j in range(1, k + 1):
        if j + 1 > pd.n:
            break
        coef = j * (rates[j - 1] - rates[j])
        if coef > 0:
            total += coef * _OrderStatTail(pd, j + 1).integral_from(reserve)
    return float(total)


def closed_form_revenue(mechanism: M.Mechanism, pd: ProductDist) -> float:
    """Exact expected revenue for the separable mechanism families."""
    if isinstance(mechanism, M.PostedPrice):
        return pp_expected_revenue(mechanism.price, pd)
    if isinstance(mechanism, M.SPAReserve):
        return spa_expected_revenue(mechanism.reserve, pd)
    if isinstance(mechanism, M.MultiUnit):
        return multiunit_expected_revenue(mechanism.units, mechanism.reserve, pd)
    if isinstance(mechanism, M.Laddered):
        return laddered_expected_revenue(mechanism.click_rates, mechanism.reserve, pd)
    raise NotSeparableError(
        "no closed form: this mechanism's revenue is not separable across "
        "top order statistics"
    )


def myerson_iid_revenue(base: Dist, n: int) -> float:
    """Expected revenue of the symmetric ironed-virtual-value auction on its
    own design distribution: E[(max ironed virtual value)+]. Exact for
    discrete bases."""
    if not base.is_discrete:
        raise ValueError("exact evaluation needs a purely atomic base")
    phi_fn = virtual_values(base)
    levels: dict[float, float] = {}
    for v, m in base.atoms:
        p = float(phi_fn.eval(v))
        levels[p] = levels.get(p, 0.0) + m
    phis = sorted(levels)
    masses = np.array([levels[p] for p in phis])
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    cum = cum / cum[-1]
    total = 0.0
    for t, p in enumerate(phis):
        if p > 0:
            total += p * (cum[t + 1] ** n - cum[t] ** n)
    return float(total)


# -- Monte Carlo ---------------------------------------------------------------


def _uniform_matrix(seed: int, samples: int, width: int) -> np.ndarray:
    # counter-based generator: the draw for sample s and column c is a fixed
    # function of (seed, s, c), independent of evaluation order
    gen = np.random.Generator(np.random.Philox(key=seed))
    return gen.random((samples, width))


_PERM_TABLES: dict[int, np.ndarray] = {}


def _perm_ranks(n: int) -> np.ndarray:
    """All n! priority-rank vectors, indexed in lexicographic order."""
    import itertools

    if n not in _PERM_TABLES:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        ranks = np.empty_like(perms)
        rows = np.arange(perms.shape[0])[:, None]
        ranks[rows, perms] = np.arange(n)[None, :]
        _PERM_TABLES[n] = ranks
    return _PERM_TABLES[n]


def _myerson_payments(base: Dist, tiebreak: str, values: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized total payments of the symmetric Myerson auction."""
    samples, n = values.shape
    phi_fn = M._phi_of(base)
    phi = np.asarray(phi_fn.eval(values))
    if tiebreak == "lexicographic":
        rank = np.broadcast_to(np.arange(n), (samples, n))
    else:
        if n > 8:
            prof_pay = np.empty(samples)
            for s in range(samples):
                prof_pay[s] = M.myerson_outcome(
                    base, tiebreak, M.Profile(tuple(values[s])), u=float(u[s])
                ).total_payment
            return prof_pay
        table = _perm_ranks(n)
        idx = np.minimum((u * len(table)).astype(np.int64), len(table) - 1)
        rank = table[idx]
    wmax = phi.max(axis=1)
    sale = wmax >= 0.0
    cand = np.where(phi == wmax[:, None], rank, n + 1)
    winner = np.argmin(cand, axis=1)
    rows = np.arange(samples)
    rank_w = rank[rows, winner]
    rival = phi.copy()
    rival[rows, winner] = -np.inf
    lower = np.where(rank > rank_w[:, None], rival, -np.inf)
    higher = np.where(rank < rank_w[:, None], rival, -np.inf)
    t_weak = np.maximum(lower.max(axis=1), 0.0)
    pay = np.asarray(phi_fn.threshold_weak(t_weak))
    t_strict = higher.max(axis=1)
    has_strict = np.isfinite(t_strict)
    strict_pay = np.asarray(phi_fn.threshold_strict(np.where(has_strict, t_strict, 0.0)))
    pay = np.where(has_strict, np.maximum(pay, strict_pay), pay)
    return np.where(sale, pay, 0.0)


def _mechanism_payments(mechanism: M.Mechanism, values: np.ndarray, u: np.ndarray) -> np.ndarray:
    n = values.shape[1]
    if isinstance(mechanism, M.PostedPrice):
        p = mechanism.price
        return p * (values >= p).any(axis=1)
    if isinstance(mechanism, M.SPAReserve):
        r = mechanism.reserve
        part = np.partition(values, n - 2, axis=1) if n >= 2 else None
        v1 = values.max(axis=1)
        v2 = part[:, n - 2] if n >= 2 else np.zeros(len(values))
        return np.where(v1 >= r, np.maximum(r, v2), 0.0)
    if isinstance(mechanism, M.MultiUnit):
        m, r = mechanism.units, mechanism.reserve
        vs = -np.sort(-values, axis=1)
        return r * (vs[:, :m] >= r).sum(axis=1) + m * np.clip(vs[:, m] - r, 0.0, None)
    if isinstance(mechanism, M.Laddered):
        rates = tuple(mechanism.click_rates) + (0.0,)
        r = mechanism.reserve
        k = len(mechanism.click_rates)
        vs = -np.sort(-values, axis=1)
        total = np.zeros(len(values))
        for i in range(1, min(k, n) + 1):
            total += rates[i - 1] * r * (vs[:, i - 1] >= r)
        for j in range(1, k + 1):
            if j + 1 > n:
                break
            total += j * (rates[j - 1] - rates[j]) * np.clip(vs[:, j] - r, 0.0, None)
        return total
    if isinstance(mechanism, M.MyersonIID):
        return _myerson_payments(mechanism.base, mechanism.tiebreak, values, u)
    raise TypeError(f"unknown mechanism {mechanism!r}")


def mc_expected_revenue(
    mechanism: M.Mechanism, pd: ProductDist, samples: int, seed: int
) -> RevenueReport:
    """Monte Carlo revenue estimate, bit-reproducible for a given
    (seed, samples): sample s consumes row s of a Philox counter stream."""
    if samples < 1:
        raise ValueError("need at least one sample")
    n = pd.n
    unif = _uniform_matrix(seed, samples, n + 1)
    values = np.column_stack(
        [pd.components[j].quantile(unif[:, j]) for j in range(n)]
    )
    payments = _mechanism_payments(mechanism, values, unif[:, n])
    mean = float(payments.mean())
    stderr = float(payments.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("inf")
    return RevenueReport(
        mechanism=mechanism.describe(),
        distribution=pd.describe(),
        expected_revenue=mean,
        method="monte-carlo",
        mc_stderr=stderr,
        samples=samples,
        seed=seed,
    )


# -- robust evaluation ----------------------------------------------------------


def worst_case_revenue_topk(mechanism: M.Mechanism, spec: AmbiguitySpec, grid: int = 4096) -> float:
    """Worst-case expected revenue over all product distributions consistent
    with the observed k-th order statistic.

    For a mechanism separable across its top k' <= k order statistics the
    minimum is attained at the consistent i.i.d. distribution, so the worst
    case is an exact closed-form evaluation there. Mechanisms outside that
    class (Myerson with ironing) are refused: their worst case is not at the
    i.i.d. point and evaluating there would overstate the guarantee.
    """
    kc = M.topk_class(mechanism)
    if kc is None:
        raise NotSeparableError(
            "worst case unavailable: this mechanism's revenue depends on "
            "order statistics below the observed one, and its minimum is not "
            "attained at the consistent i.i.d. distribution"
        )
    if kc > spec.k:
        raise ValueError(
            f"mechanism needs the top {kc} order statistics but only the "
            f"{spec.k}-th is observed"
        )
    fbar = consistent_iid(spec, grid=grid)
    return closed_form_revenue(mechanism, iid(fbar, spec.n))


@dataclass(frozen=True)
class ReserveResult:
    reserve: float
    worst_case_revenue: float
    regular_above_reserve: bool
    monopoly_price: float
    optimality_certified: bool


def _family_builder(family):
    if family == "posted_price":
        return lambda r: M.PostedPrice(r)
    if family == "spa":
        return lambda r: M.SPAReserve(r)
    if isinstance(family, tuple) and family and family[0] == "multi_unit":
        m = int(family[1])
        return lambda r: M.MultiUnit(m, r)
    if isinstance(family, tuple) and family and family[0] == "laddered":
        rates = tuple(family[1])
        return lambda r: M.Laddered(rates, r)
    raise ValueError(f"unknown mechanism family {family!r}")


def optimal_robust_reserve(
    spec: AmbiguitySpec, family, grid: int = 4096, price_tol: float = 1e-8
) -> ReserveResult:
    """Maximize the worst-case revenue of a reserve-parameterized family.

    Candidates are the knots of the consistent i.i.d. distribution, refined
    by a scan plus golden-section polish on the bracketing segments. Also
    reports whether the consistent i.i.d. distribution is regular above its
    monopoly reserve: when it is (and the family spans the optimal auction's
    implementation, as the second-price family does), the returned reserve is
    robustly optimal among all mechanisms, not merely within the family.
    """
    make = _family_builder(family)
    kc = M.topk_class(make(0.0))
    if kc > spec.k:
        raise ValueError(
            f"family needs the top {kc} order statistics but only the "
            f"{spec.k}-th is observed"
        )
    fbar = consistent_iid(spec, grid=grid)
    pd = iid(fbar, spec.n)

    def objective(r: float) -> float:
        return closed_form_revenue(make(r), pd)

    candidates = np.unique(np.concatenate([[0.0], fbar.xs]))
    values = np.array([objective(r) for r in candidates])
    best = int(np.argmax(values))
    lo = candidates[best - 1] if best > 0 else candidates[best]
    hi = candidates[best + 1] if best + 1 < len(candidates) else candidates[best]
    r_best, v_best = float(candidates[best]), float(values[best])
    if hi > lo:
        for r in np.linspace(lo, hi, 65):
            v = objective(float(r))
            if v > v_best:
                r_best, v_best = float(r), v
        span = (hi - lo) / 64
        a, b = max(lo, r_best - span), min(hi, r_best + span)
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        fc, fd = objective(c), objective(d)
        while b - a > price_tol:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = objective(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = objective(d)
        r_mid = 0.5 * (a + b)
        v_mid = objective(r_mid)
        if v_mid > v_best:
            r_best, v_best = float(r_mid), float(v_mid)
    report = is_regular_above_reserve(fbar)
    certified = report.regular_above_reserve and family == "spa"
    return ReserveResult(
        reserve=r_best,
        worst_case_revenue=v_best,
        regular_above_reserve=report.regular_above_reserve,
        monopoly_price=report.monopoly_price,
        optimality_certified=bool(certified or (family == "posted_price" and spec.k == 1)),
    )


# -- unknown number of bidders ---------------------------------------------------


def z_star(g: float, tol: float = 1e-14) -> float:
    """Unique root of z * (1 - ln z) = g on (0, 1]; the map is increasing
    there so plain bisection converges unconditionally."""
    if not 0.0 <= g <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if g == 0.0:
        return 0.0
    if g == 1.0:
        return 1.0
    lo, hi = 1e-300, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid * (1.0 - math.log(mid)) < g:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def unknown_n_bound(price: float, G: Dist) -> float:
    """Revenue guarantee of a second-price auction with the given reserve
    that holds for every number of bidders consistent with the observed
    second-order-statistic distribution G:

        price * (1 - z*) + integral of (1 - G) above the price,

    with z* solving z(1 - ln z) = G(price-).
    """
    if price < 0:
        raise ValueError("price must be non-negative")
    z = z_star(float(G.cdf_left(price)))
    return float(price * (1.0 - z) + _survival_integral(G, price))


@dataclass(frozen=True)
class UnknownNReserve:
    reserve: float
    guarantee: float
    z_star: float


def optimal_unknown_n_reserve(G: Dist, price_tol: float = 1e-6) -> UnknownNReserve:
    """Reserve maximizing the any-number-of-bidders guarantee."""
    candidates = np.unique(np.concatenate([[0.0], G.xs]))
    values = np.array([unknown_n_bound(float(r), G) for r in candidates])
    best = int(np.argmax(values))
    lo = candidates[max(best - 1, 0)]
    hi = candidates[min(best + 1, len(candidates) - 1)]
    r_best, v_best = float(candidates[best]), float(values[best])
    if hi > lo:
        for r in np.linspace(lo, hi, 129):
            v = unknown_n_bound(float(r), G)
            if v > v_best:
                r_best, v_best = float(r), v
        span = (hi - lo) / 128
        a, b = max(lo, r_best - span), min(hi, r_best + span)
        while b - a > price_tol:
            c = a + (b - a) / 3
            d = b - (b - a) / 3
            if unknown_n_bound(c, G) >= unknown_n_bound(d, G):
                b = d
            else:
                a = c
        r_mid = 0.5 * (a + b)
        if unknown_n_bound(r_mid, G) > v_best:
            r_best, v_best = float(r_mid), float(unknown_n_bound(r_mid, G))
    return UnknownNReserve(r_best, v_best, z_star(float(G.cdf_left(r_best))))


# -- sandwich bounds ---------------------------------------------------------------


@dataclass(frozen=True)
class SandwichResult:
    lower: float
    upper: float
    spa_reserve: float
    regular_above_reserve: bool
    upper_method: str

    @property
    def ratio(self) -> float:
        return self.lower / self.upper if self.upper > 0 else 1.0


def robust_sandwich(
    spec: AmbiguitySpec, grid: int = 4096, mc_samples: int = 400_000, seed: int = 7
) -> SandwichResult:
    """Bracket the robust optimum: the optimal-reserve second-price worst
    case from below, the ironed-optimal revenue at the consistent i.i.d.
    distribution from above. The two meet exactly when that distribution is
    regular above its reserve; the lower bound is never worse than half the
    upper one."""
    if spec.k < 2:
        raise ValueError("sandwich bounds need k >= 2")
    res = optimal_robust_reserve(spec, "spa", grid=grid)
    fbar = consistent_iid(spec, grid=grid)
    if fbar.is_discrete:
        upper = myerson_iid_revenue(fbar, spec.n)
        method = "closed-form"
    else:
        upper = mc_expected_revenue(
            M.MyersonIID(fbar, "lexicographic"), iid(fbar, spec.n), mc_samples, seed
        ).expected_revenue
        method = "monte-carlo"
    return SandwichResult(
        lower=res.worst_case_revenue,
        upper=float(upper),
        spa_reserve=res.reserve,
        regular_above_reserve=res.regular_above_reserve,
        upper_method=method,
    )
