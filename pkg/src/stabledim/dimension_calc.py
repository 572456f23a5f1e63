"""Closed-form dimension calculus for slightly thick horseshoes.

Covers the threshold quantity beta*, the parameter regions PY and D, the
eigenvalue condition, the width cascade with its bound constants, the
piecewise exponent e(d) and the expected-dimension solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import bisect

BISECT_XTOL = 1e-15
BISECT_MAXITER = 200
REL_TOL = 1e-9
BAND = 1e-12


def _root(f, a, b):
    return bisect(f, a, b, xtol=BISECT_XTOL, maxiter=BISECT_MAXITER)


# --------------------------------------------------------------------------
# dimension pairs and the regions PY, D
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DimensionPair:
    """Transverse dimensions ``(d_s0, d_u0)`` of the stable/unstable sets."""

    d_s0: float
    d_u0: float

    def __post_init__(self):
        for name in ("d_s0", "d_u0"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name}={v!r} must lie in (0, 1)")

    @property
    def total(self) -> float:
        return self.d_s0 + self.d_u0

    @property
    def dmax(self) -> float:
        return max(self.d_s0, self.d_u0)

    @property
    def dmin(self) -> float:
        return min(self.d_s0, self.d_u0)


def beta_star_array(ds, du):
    """Vectorised beta*; returns nan where the denominator vanishes."""
    ds = np.asarray(ds, dtype=float)
    du = np.asarray(du, dtype=float)
    s = ds + du
    mx = np.maximum(ds, du)
    mn = np.minimum(ds, du)
    den = mx * (mx + s - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (1.0 - mn) * s / den
    return np.where(den == 0.0, np.nan, out)


def beta_star(dp: DimensionPair) -> float:
    """beta* = (1 - min)(d_s + d_u) / (max (max + d_s + d_u - 1))."""
    den = dp.dmax * (dp.dmax + dp.total - 1.0)
    if den == 0.0:
        raise ValueError("singular denominator: max + d_s0 + d_u0 = 1")
    return (1.0 - dp.dmin) * dp.total / den


def _py_inequality(ds, du):
    s = ds + du
    mx = np.maximum(ds, du)
    return s * s + mx * mx < s + mx


def in_PY(dp: DimensionPair) -> bool:
    """PY inequality ``S^2 + M^2 < S + M`` with S the sum and M the max.

    Where ``M + S > 1`` (the only place beta* is positive) the inequality is
    the same statement as ``beta* > 1``; that equivalence is asserted.
    """
    res = bool(_py_inequality(dp.d_s0, dp.d_u0))
    if dp.dmax + dp.total > 1.0:
        b = beta_star(dp)
        if abs(b - 1.0) > BAND:
            assert res == (b > 1.0), "PY inequality disagrees with beta* > 1"
    return res


def in_D(dp: DimensionPair) -> bool:
    den = dp.dmax * (dp.dmax + dp.total - 1.0)
    if den <= 0.0:
        return False
    return beta_star(dp) > 5.0 / 3.0


def region_masks(resolution: int, domain: str = "thick"):
    """Midpoint grid with PY and D membership masks.

    ``domain="thick"`` restricts both regions to ``d_s0 + d_u0 > 1`` where
    the dimension formulas live; ``"square"`` uses the whole open square.
    Returns ``(centers, in_py, in_d, beta)`` with arrays indexed ``[i_s, i_u]``.
    """
    c = (np.arange(resolution) + 0.5) / resolution
    ds, du = np.meshgrid(c, c, indexing="ij")
    beta = beta_star_array(ds, du)
    py = _py_inequality(ds, du)
    d = np.nan_to_num(beta, nan=-np.inf) > 5.0 / 3.0
    d &= (np.maximum(ds, du) + ds + du) > 1.0
    if domain == "thick":
        thick = (ds + du) > 1.0
        py &= thick
        d &= thick
    elif domain != "square":
        raise ValueError(f"unknown domain {domain!r}")
    return c, py, d, beta


def region_areas(resolution: int, domain: str = "thick"):
    """Midpoint-rule areas of D and PY and their ratio.

    Counts are integers, so the sums are exact and machine independent.
    """
    if resolution < 256:
        raise ValueError("resolution must be at least 256")
    _, py, d, _ = region_masks(resolution, domain)
    cell = 1.0 / resolution**2
    n_py = int(np.count_nonzero(py))
    n_d = int(np.count_nonzero(d))
    assert not np.any(d & ~py), "D must be contained in PY"
    area_py = n_py * cell
    area_d = n_d * cell
    return area_d, area_py, (area_d / area_py if n_py else float("nan"))


def diagonal_beta(d: float) -> float:
    """beta*(d, d) = 2(1 - d)/(3d - 1)."""
    return 2.0 * (1.0 - d) / (3.0 * d - 1.0)


def diagonal_endpoints():
    """Roots of beta*(d,d) = 1 and beta*(d,d) = 5/3 on (1/2, 1)."""
    lo, hi = 0.5, 1.0
    f = lambda target: (lambda d: beta_star(DimensionPair(d, d)) - target)
    return _root(f(1.0), lo + 1e-15, hi - 1e-15), _root(f(5.0 / 3.0), lo + 1e-15, hi - 1e-15)


# --------------------------------------------------------------------------
# eigenvalue condition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenData:
    lambda_ps: float
    mu_ps: float
    lambda_pu: float
    mu_pu: float
    conservative: bool = False

    def __post_init__(self):
        for lam, mu in ((self.lambda_ps, self.mu_ps), (self.lambda_pu, self.mu_pu)):
            if not (0.0 < abs(lam) < 1.0 < abs(mu)):
                raise ValueError("eigenvalues must satisfy |lambda| < 1 < |mu|")
            if self.conservative and abs(abs(lam * mu) - 1.0) > 1e-12:
                raise ValueError("conservative data needs |lambda * mu| = 1")

    @classmethod
    def conservative_from(cls, mu_ps: float, mu_pu: float) -> "EigenData":
        return cls(1.0 / mu_ps, mu_ps, 1.0 / mu_pu, mu_pu, conservative=True)

    @property
    def omega_s(self) -> float:
        return -math.log(abs(self.lambda_ps)) / math.log(abs(self.mu_ps))

    @property
    def omega_u(self) -> float:
        return math.log(abs(self.mu_pu)) / -math.log(abs(self.lambda_pu))


def eigen_condition(dp: DimensionPair, e: EigenData) -> bool:
    """beta* <= 1 + min(omega_s, omega_u)."""
    b = beta_star(dp)
    res = b <= 1.0 + min(e.omega_s, e.omega_u)
    if e.conservative and abs(b - 2.0) > BAND:
        assert res == (b <= 2.0), "conservative case must reduce to beta* <= 2"
    return res


def cantor_dimensions(ell: int, lam: float, mu: float) -> DimensionPair:
    """Dimensions of the affine Cantor model with ``ell`` branches."""
    if ell < 2 or not (0.0 < lam < 1.0) or mu <= 1.0:
        raise ValueError("need ell >= 2, 0 < lambda < 1 < mu")
    if ell * lam >= 1.0 or ell / mu >= 1.0:
        raise ValueError("branches do not fit: need ell*lambda < 1 and ell/mu < 1")
    return DimensionPair(math.log(ell) / math.log(1.0 / lam), math.log(ell) / math.log(mu))


def cantor_eigendata(lam: float, mu: float) -> EigenData:
    return EigenData(lam, mu, lam, mu)


# --------------------------------------------------------------------------
# scales and the width cascade
# --------------------------------------------------------------------------


def candidate_scales(eps0: float, tau: float, k: int) -> list[float]:
    """eps_{j+1} = eps_j^(1+tau) for j < k."""
    if not (0.0 < eps0 < 1.0 and 0.0 < tau < 1.0 + 1e-15):
        raise ValueError("need 0 < eps0 < 1 and 0 < tau <= 1")
    out = [eps0]
    for _ in range(k):
        out.append(out[-1] ** (1.0 + tau))
    for j, e in enumerate(out):
        closed = eps0 ** ((1.0 + tau) ** j)
        assert e == closed or abs(e - closed) <= 1e-9 * closed
    return out


def strongly_regular_measure_bound(eps0: float, tau: float) -> float:
    return eps0 * (1.0 - 3.0 * eps0 ** (tau * tau))


@dataclass(frozen=True)
class CascadeParams:
    """Cascade parameters; ``beta_tilde`` is derived from beta, eta, tau.

    ``strict=False`` skips the ordering checks so degenerate values can be
    fed to the evaluators.
    """

    eps0: float
    tau: float
    eta: float
    beta: float
    beta_hat: float
    C: float = 1.0
    strict: bool = True

    def __post_init__(self):
        if self.C < 1.0:
            raise ValueError("C must be >= 1")
        if not self.strict:
            return
        if not (0.0 < self.eps0 < self.eta / 10.0 < self.tau / 100.0) or self.tau >= 1.0:
            raise ValueError("need 0 < eps0 < eta/10 < tau/100 < 1/100")
        if not (1.0 < self.beta_hat < self.beta_tilde < self.beta):
            raise ValueError("need 1 < beta_hat < beta_tilde < beta")

    @property
    def beta_tilde(self) -> float:
        return self.beta * (1.0 - self.eta) / (1.0 + self.tau)


@dataclass(frozen=True)
class WidthCascade:
    P_widths: tuple
    Q_widths: tuple
    params: CascadeParams

    def __post_init__(self):
        object.__setattr__(self, "P_widths", tuple(float(v) for v in self.P_widths))
        object.__setattr__(self, "Q_widths", tuple(float(v) for v in self.Q_widths))
        if len(self.P_widths) != len(self.Q_widths):
            raise ValueError("P and Q width lists differ in length")
        if any(v <= 0.0 for v in self.P_widths + self.Q_widths):
            raise ValueError("widths must be positive")

    @property
    def k(self) -> int:
        return len(self.Q_widths) - 1


@dataclass
class CascadeReport:
    admissible: bool
    family: Optional[str] = None
    index: Optional[int] = None
    lhs: Optional[float] = None
    rhs: Optional[float] = None

    def __str__(self):
        if self.admissible:
            return "admissible"
        return f"violation of {self.family} at j={self.index}: {float(self.lhs)!r} > {float(self.rhs)!r}"


def cascade_check(w: WidthCascade) -> CascadeReport:
    """Check the three width-decay families index by index.

    Families, in the order they are tested at each index:
    ``initial`` (max(|P_1|,|Q_1|) <= eps0^beta), ``recursive``
    (max(|P_{j+1}|,|Q_{j+1}|) <= C |Q_j|^beta_tilde, j >= 1) and
    ``doubly-exponential`` (max(|P_j|,|Q_j|) <= eps0^(beta_hat^j), j >= 1).
    """
    p = w.params
    P, Q = w.P_widths, w.Q_widths
    slack = 1.0 + REL_TOL
    if w.k >= 1:
        lhs = max(P[1], Q[1])
        rhs = p.eps0**p.beta
        if lhs > rhs * slack:
            return CascadeReport(False, "initial", 1, lhs, rhs)
    for j in range(1, w.k + 1):
        if j + 1 <= w.k:
            lhs = max(P[j + 1], Q[j + 1])
            rhs = p.C * Q[j] ** p.beta_tilde
            if lhs > rhs * slack:
                return CascadeReport(False, "recursive", j, lhs, rhs)
        lhs = max(P[j], Q[j])
        rhs = p.eps0 ** (p.beta_hat**j)
        if lhs > rhs * slack:
            return CascadeReport(False, "doubly-exponential", j, lhs, rhs)
    return CascadeReport(True)


def synthetic_cascade(params: CascadeParams, k: int, P0: float = 0.1, Q0: Optional[float] = None) -> WidthCascade:
    """Admissible cascade decaying at the fastest allowed rate.

    |P_1| = |Q_1| = eps0^beta and |Q_{j+1}| = |P_{j+1}| = |Q_j|^beta_tilde,
    so the widths are eps0^(beta * beta_tilde^(j-1)).
    """
    Q0 = params.eps0 if Q0 is None else Q0
    P = [P0]
    Q = [Q0]
    v = params.eps0**params.beta
    for _ in range(k):
        P.append(v)
        Q.append(v)
        v = v**params.beta_tilde
    return WidthCascade(tuple(P), tuple(Q), params)


@dataclass(frozen=True)
class BoundConstants:
    k: int
    K_k: float
    L_k: float
    r_k: float
    s_k: float
    N_k: float
    jacobian_chain_ok: bool = True

    def __post_init__(self):
        for name in ("K_k", "L_k", "r_k", "s_k", "N_k"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


def _log_bound_terms(w: WidthCascade, k: int):
    p = w.params
    P, Q = w.P_widths, w.Q_widths
    lC = math.log(p.C)
    ld_prev = math.log(Q[k - 1])
    lprod = math.fsum(math.log(Q[j]) for j in range(k - 1))
    lK = k * lC - ld_prev - 0.5 * (1.0 + p.eta) * lprod
    lL = k * lC + math.log(P[0]) - ld_prev
    lr = lC + 0.5 * (1.0 - p.eta) * math.log(Q[k]) + math.log(P[k])
    lN = 2.0 * lC + 0.5 * (1.0 - p.eta) * ld_prev - lr
    return lK, lL, lr, lN


def bound_constants(w: WidthCascade, k: int) -> BoundConstants:
    """K_k, L_k, r_k, N_k and s_k = L_k r_k / K_k for the cascade at depth k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > w.k:
        raise ValueError(f"cascade has depth {w.k} < {k}")
    lK, lL, lr, lN = _log_bound_terms(w, k)
    P, Q = w.P_widths, w.Q_widths
    # product of |P_i|/|Q_i| over i < k telescopes to |P_0|/|Q_{k-1}| when
    # each |P_i| <= |Q_{i-1}|
    lchain = math.fsum(math.log(P[i]) - math.log(Q[i]) for i in range(k))
    chain_ok = lchain <= math.log(P[0]) - math.log(Q[k - 1]) + 1e-12
    return BoundConstants(
        k=k,
        K_k=math.exp(lK),
        L_k=math.exp(lL),
        r_k=math.exp(lr),
        s_k=math.exp(lL + lr - lK),
        N_k=math.exp(lN),
        jacobian_chain_ok=chain_ok,
    )


def _exceptional_log(w: WidthCascade, k: int, d: float) -> float:
    p = w.params
    P, Q = w.P_widths, w.Q_widths
    lprod = math.fsum(math.log(Q[j]) for j in range(k - 1))
    num = (
        k * math.log(p.C)
        + (d - 1.0) * (math.log(P[0]) + math.log(P[k]))
        + (d - 1.0) * 0.5 * (1.0 - p.eta) * math.log(Q[k])
    )
    den = 0.5 * (1.0 + p.eta) * math.log(Q[k - 1]) + (2.0 - d) * 0.5 * (1.0 + p.eta) * lprod
    return num - den


def exceptional_measure_bound(w: WidthCascade, k: int, d: float) -> float:
    """Closed form of the depth-k exceptional-set measure bound.

    The same number is rebuilt from the bound constants as
    ``C^k N_k r_k^d K_k^(2-d) L_k^(d-1)``; the generic constant picks up
    ``C^(k+d+1)`` along the way, which is divided out before comparing.
    """
    if not (1.0 <= d <= 2.0):
        raise ValueError("d must lie in [1, 2]")
    if k < 2 or k > w.k:
        raise ValueError("need 2 <= k <= cascade depth")
    direct = _exceptional_log(w, k, d)
    lK, lL, lr, lN = _log_bound_terms(w, k)
    C = w.params.C
    rebuilt = k * math.log(C) + lN + d * lr + (2.0 - d) * lK + (d - 1.0) * lL
    rebuilt -= (k + d + 1.0) * math.log(C)
    value = math.exp(direct)
    other = math.exp(rebuilt)
    assert abs(value - other) <= REL_TOL * max(value, other), (value, other)
    return value


def exceptional_measure_forms(w: WidthCascade, k: int, d: float):
    """Both forms of the exceptional bound, for external comparison."""
    lK, lL, lr, lN = _log_bound_terms(w, k)
    C = w.params.C
    direct = math.exp(_exceptional_log(w, k, d))
    rebuilt = math.exp(
        k * math.log(C) + lN + d * lr + (2.0 - d) * lK + (d - 1.0) * lL - (k + d + 1.0) * math.log(C)
    )
    return direct, rebuilt


# --------------------------------------------------------------------------
# case analysis, e(d) and the expected dimension
# --------------------------------------------------------------------------


def branch_a(dp: DimensionPair, beta: Optional[float] = None) -> bool:
    """True for case (a)/(i): beta d_s0 > 1/2 + (1 - d_s0)/(2 (beta - 1))."""
    b = beta_star(dp) if beta is None else beta
    if b <= 1.0:
        raise ValueError("branch test needs beta > 1")
    return b * dp.d_s0 > 0.5 + (1.0 - dp.d_s0) / (2.0 * (b - 1.0))


def _case_b_exponent(d: float, bt: float, eta: float) -> float:
    return (d - 1.0) * (3.0 - eta) / 2.0 - (1.0 + eta) * (
        1.0 / (2.0 * bt) + (2.0 - d) / (2.0 * bt * (bt - 1.0))
    )


@dataclass
class CaseBound:
    case: str
    bound: float
    exceptional: float
    dominates: bool


def lemma_case_bound(dp: DimensionPair, w: WidthCascade, k: int, d: float) -> CaseBound:
    """Case-selected bound on the depth-k exceptional measure.

    Case (a): C^k |P_0|^(d-1) |Q_k|^((d-1)(1-eta)/2).
    Case (b): C^k |P_0|^(d-1) |Q_k|^x with
    x = (d-1)(3-eta)/2 - (1+eta)(1/(2 bt) + (2-d)/(2 bt (bt-1))).
    ``dominates`` records whether the exceptional bound sits below it.
    """
    rep = cascade_check(w)
    if not rep.admissible:
        raise ValueError(f"inadmissible cascade: {rep}")
    if not (1.0 <= d <= 1.0 + dp.d_s0):
        raise ValueError("need 1 <= d <= 1 + d_s0")
    p = w.params
    P, Q = w.P_widths, w.Q_widths
    base = k * math.log(p.C) + (d - 1.0) * math.log(P[0])
    if branch_a(dp):
        case = "a"
        expo = (d - 1.0) * (1.0 - p.eta) / 2.0
    else:
        case = "b"
        expo = _case_b_exponent(d, p.beta_tilde, p.eta)
    lbound = base + expo * math.log(Q[k])
    lexc = _exceptional_log(w, k, d)
    return CaseBound(case, math.exp(lbound), math.exp(lexc), lexc <= lbound + 1e-12 * abs(lbound))


def e_of_d(dp: DimensionPair, d: float, beta_tilde: float) -> float:
    """Piecewise exponent e(d); the branch is chosen by the beta* test."""
    if beta_tilde <= 1.0:
        raise ValueError("beta_tilde must exceed 1")
    if not (1.0 <= d <= 2.0):
        raise ValueError("d must lie in [1, 2]")
    if branch_a(dp):
        return (d - 1.0) / 2.0
    bt = beta_tilde
    return 3.0 * (d - 1.0) / 2.0 - 1.0 / (2.0 * bt) - (2.0 - d) / (2.0 * bt * (bt - 1.0))


def case_ii_value(dp: DimensionPair, beta: float) -> float:
    t = dp.total - 1.0
    a = 1.0 / (2.0 * beta)
    b = 1.0 / (2.0 * beta * (beta - 1.0))
    return (t + a + b) / (1.5 + t / dp.d_s0 + b)


def case_i_value(dp: DimensionPair) -> float:
    return 1.0 / (1.0 / dp.d_s0 + 1.0 / (2.0 * (dp.total - 1.0)))


def solve_expected_dim(dp: DimensionPair, beta: Optional[float] = None):
    """Expected value of ``d - 1`` from the case formulas.

    Returns ``(case, value)`` with case ``"i"`` or ``"ii"``. ``beta``
    overrides beta* inside the case (ii) formula.
    """
    if dp.total <= 1.0:
        raise ValueError("need d_s0 + d_u0 > 1")
    if not in_PY(dp):
        raise ValueError("pair is outside PY")
    if branch_a(dp):
        return "i", case_i_value(dp)
    return "ii", case_ii_value(dp, beta_star(dp) if beta is None else beta)


def case_ii_criterion(dp: DimensionPair) -> bool:
    """1 + (1 - d_s0)/(beta* - 1) < 3 beta* d_s0."""
    b = beta_star(dp)
    return 1.0 + (1.0 - dp.d_s0) / (b - 1.0) < 3.0 * b * dp.d_s0


def containment_threshold(beta_tilde, eta, depth: Optional[int] = None) -> bool:
    """Partial-sum test sum_{l=1}^{depth} beta_tilde^(-l) < (3 - eta)/2.

    Inputs are converted to exact rationals, so ``Fraction(5, 3)`` sits
    exactly on the boundary. ``depth=None`` means the infinite series.
    """
    bt = Fraction(beta_tilde)
    et = Fraction(eta)
    if bt <= 1:
        raise ValueError("beta_tilde must exceed 1")
    rhs = (3 - et) / 2
    if depth is None or depth == math.inf:
        return 1 / (bt - 1) < rhs
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    total = Fraction(0)
    term = Fraction(1)
    for _ in range(int(depth)):
        term /= bt
        total += term
    return total < rhs


@dataclass(frozen=True)
class HolderParams:
    p: float
    q: float
    rho_s: float
    sigma: float = 0.0
    d_u_star: float = 0.0

    def __post_init__(self):
        if self.p <= 1.0 or self.q <= 1.0:
            raise ValueError("p and q must exceed 1")
        if abs(1.0 / self.p + 1.0 / self.q - 1.0) > 1e-12:
            raise ValueError("p and q are not conjugate")

    @classmethod
    def from_rho(cls, rho_s: float, p: float = 2.0, **kw) -> "HolderParams":
        return cls(p=p, q=p / (p - 1.0), rho_s=rho_s, **kw)


@dataclass
class HolderReport:
    solved: bool
    d: Optional[float]
    p: Optional[float] = None
    q: Optional[float] = None
    case: Optional[str] = None
    closed_form: Optional[float] = None
    matches_closed_form: Optional[bool] = None
    message: str = ""


def holder_combine(hp: HolderParams, dp: DimensionPair, d, beta_tilde: float, eta: float,
                   target: Optional[float] = None, C_eta: float = 0.0) -> HolderReport:
    """Solve (d-1)p = rho_s, (e(d) - C eta) q = target, 1/p + 1/q = 1.

    Eliminating p, q leaves (d-1)/rho_s + (e(d) - C eta)/target = 1, solved
    by bisection on (1, 2). ``d`` is an initial guess kept only for the
    report when no root exists. ``target`` defaults to d_s0 + d_u0 - 1, and
    the closed form is the case formula with beta_tilde substituted.
    """
    if target is None:
        target = dp.total - 1.0
    if target <= 0.0 or hp.rho_s <= 0.0:
        raise ValueError("rho_s and target must be positive")
    shift = C_eta * eta

    def g(x):
        return (x - 1.0) / hp.rho_s + (e_of_d(dp, x, beta_tilde) - shift) / target - 1.0

    lo, hi = 1.0, 2.0
    glo, ghi = g(lo), g(hi)
    case = "i" if branch_a(dp) else "ii"
    if glo * ghi > 0.0:
        return HolderReport(False, None, case=case, message="no root in (1, 2)")
    x = _root(g, lo, hi)
    p_sol = hp.rho_s / (x - 1.0)
    e_val = e_of_d(dp, x, beta_tilde) - shift
    q_sol = target / e_val if e_val != 0.0 else math.inf
    if case == "i":
        closed = 1.0 / (1.0 / hp.rho_s + 1.0 / (2.0 * target))
    else:
        a = 1.0 / (2.0 * beta_tilde)
        b = 1.0 / (2.0 * beta_tilde * (beta_tilde - 1.0))
        closed = (target + a + b) / (1.5 + target / hp.rho_s + b)
    match = shift == 0.0 and abs((x - 1.0) - closed) <= REL_TOL * max(1.0, closed)
    return HolderReport(True, x, p_sol, q_sol, case, closed, match)


def admissible_count_bound(Qk: float, C: float, eta: float) -> float:
    """Evaluator for the itinerary-count bound C |Q_k|^(-C eta); unverified."""
    return C * Qk ** (-C * eta)
