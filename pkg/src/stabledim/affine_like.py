"""Affine-like maps in implicit form and their compositions.

A map F from a vertical strip P in R0 = I0^s x I0^u onto a horizontal strip
Q in R1 = I1^s x I1^u is encoded by two functions on I0^u x I1^s:

    F(x0, y0) = (x1, y1)  iff  x0 = A(y0, x1) and y1 = B(y0, x1).

Throughout, the representation functions take ``(y, x)`` in that order and
subscripts follow the same convention: A_x is the derivative in the second
argument x1, A_y the derivative in the first argument y0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

GRID_N = 64
REFINE_N = 17
TOL = 1e-12


# --------------------------------------------------------------------------
# basic types
# --------------------------------------------------------------------------


def _interval(v) -> tuple:
    lo, hi = (float(v[0]), float(v[1]))
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"bad interval {v!r}")
    return (lo, hi)


@dataclass(frozen=True)
class IntervalPair:
    """Stable (x) and unstable (y) intervals of a rectangle I_s x I_u."""

    s: tuple
    u: tuple

    def __post_init__(self):
        object.__setattr__(self, "s", _interval(self.s))
        object.__setattr__(self, "u", _interval(self.u))

    @property
    def lengths(self):
        return (self.s[1] - self.s[0], self.u[1] - self.u[0])


@dataclass(frozen=True)
class ConeParams:
    lam: float
    u0: float
    v0: float
    D0: float = 1.0
    b: float = 1.0
    C: float = 2.0

    def __post_init__(self):
        if self.lam <= 1.0 or self.u0 <= 0.0 or self.v0 <= 0.0:
            raise ValueError("need lambda > 1 and u0, v0 > 0")
        if not (1.0 < self.u0 * self.v0 <= self.lam**2):
            raise ValueError("need 1 < u0 v0 <= lambda^2")
        if self.D0 <= 0 or self.b <= 0 or self.C < 1.0:
            raise ValueError("need D0 > 0, b > 0, C >= 1")

    def squared(self) -> "ConeParams":
        return replace(self, lam=self.lam**2)


# --------------------------------------------------------------------------
# implicit representations
# --------------------------------------------------------------------------


class ImplicitRep:
    """Pair (A, B) with first and second partial derivatives.

    ``first`` returns (A_x, A_y, B_x, B_y); ``second`` returns
    (A_xx, A_xy, A_yy, B_xx, B_xy, B_yy). Subclasses without analytic
    second derivatives fall back on centred differences of ``first``.
    """

    kind = "abstract"
    fd_step = (1e-5, 1e-5)

    def values(self, y, x):
        raise NotImplementedError

    def first(self, y, x):
        raise NotImplementedError

    def second(self, y, x):
        hy, hx = self.fd_step
        fxp = self.first(y, x + hx)
        fxm = self.first(y, x - hx)
        fyp = self.first(y + hy, x)
        fym = self.first(y - hy, x)
        A_xx = (fxp[0] - fxm[0]) / (2 * hx)
        A_xy = (fyp[0] - fym[0]) / (2 * hy)
        A_yy = (fyp[1] - fym[1]) / (2 * hy)
        B_xx = (fxp[2] - fxm[2]) / (2 * hx)
        B_xy = (fxp[3] - fxm[3]) / (2 * hx)
        B_yy = (fyp[3] - fym[3]) / (2 * hy)
        return A_xx, A_xy, A_yy, B_xx, B_xy, B_yy


_COEFFS = ("c", "cx", "cy", "cxx", "cxy", "cyy")


class QuadraticRep(ImplicitRep):
    """A, B = c + cx x + cy y + cxx x^2 + cxy x y + cyy y^2."""

    def __init__(self, A, B):
        self.a = np.zeros(6)
        self.b = np.zeros(6)
        self.a[: len(A)] = A
        self.b[: len(B)] = B

    @property
    def kind(self):
        return "linear" if not (self.a[3:].any() or self.b[3:].any()) else "quadratic"

    @staticmethod
    def _eval(c, y, x):
        return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y

    def values(self, y, x):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        return self._eval(self.a, y, x), self._eval(self.b, y, x)

    def first(self, y, x):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        a, b = self.a, self.b
        z = np.zeros(np.broadcast(y, x).shape)
        return (
            a[1] + 2 * a[3] * x + a[4] * y + z,
            a[2] + a[4] * x + 2 * a[5] * y + z,
            b[1] + 2 * b[3] * x + b[4] * y + z,
            b[2] + b[4] * x + 2 * b[5] * y + z,
        )

    def second(self, y, x):
        z = np.zeros(np.broadcast(np.asarray(y), np.asarray(x)).shape)
        a, b = self.a, self.b
        return (2 * a[3] + z, a[4] + z, 2 * a[5] + z, 2 * b[3] + z, b[4] + z, 2 * b[5] + z)


class GridRep(ImplicitRep):
    """Tabulated A, B on a tensor grid over (y, x), spline interpolated.

    Derivatives are centred differences with step equal to 1/64 of the
    interval lengths.
    """

    kind = "grid"

    def __init__(self, ys, xs, A_table, B_table):
        self.ys = np.asarray(ys, dtype=float)
        self.xs = np.asarray(xs, dtype=float)
        self.A_table = np.asarray(A_table, dtype=float)
        self.B_table = np.asarray(B_table, dtype=float)
        k = min(3, len(self.ys) - 1, len(self.xs) - 1)
        self._A = RectBivariateSpline(self.ys, self.xs, self.A_table, kx=k, ky=k)
        self._B = RectBivariateSpline(self.ys, self.xs, self.B_table, kx=k, ky=k)
        self.fd_step = ((self.ys[-1] - self.ys[0]) / 64.0, (self.xs[-1] - self.xs[0]) / 64.0)

    @classmethod
    def sample(cls, rep: ImplicitRep, yint, xint, n: int = 65) -> "GridRep":
        ys = np.linspace(*yint, n)
        xs = np.linspace(*xint, n)
        Y, X = np.meshgrid(ys, xs, indexing="ij")
        A, B = rep.values(Y, X)
        return cls(ys, xs, A, B)

    def values(self, y, x):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        shape = np.broadcast(y, x).shape
        yy = np.broadcast_to(y, shape).ravel()
        xx = np.broadcast_to(x, shape).ravel()
        return self._A(yy, xx, grid=False).reshape(shape), self._B(yy, xx, grid=False).reshape(shape)

    def first(self, y, x):
        hy, hx = self.fd_step
        Axp, Bxp = self.values(y, x + hx)
        Axm, Bxm = self.values(y, x - hx)
        Ayp, Byp = self.values(y + hy, x)
        Aym, Bym = self.values(y - hy, x)
        return ((Axp - Axm) / (2 * hx), (Ayp - Aym) / (2 * hy),
                (Bxp - Bxm) / (2 * hx), (Byp - Bym) / (2 * hy))


class ComposedRep(ImplicitRep):
    """Implicit pair of F2 o F, found by solving x1 = A2(B(y0, x1), x2).

    The map x1 -> A2(B(y0, x1), x2) has slope A2_y B_x, which the cone
    conditions keep below 1/(u0 v0) < 1, so Newton from the midpoint
    converges.
    """

    kind = "composed"

    def __init__(self, r1: ImplicitRep, r2: ImplicitRep, x1_interval, steps=(1e-5, 1e-5)):
        self.r1 = r1
        self.r2 = r2
        self.x1_interval = x1_interval
        self.fd_step = steps

    def solve(self, y0, x2):
        y0, x2 = np.broadcast_arrays(np.asarray(y0, dtype=float), np.asarray(x2, dtype=float))
        x1 = np.full(y0.shape, 0.5 * sum(self.x1_interval))
        for _ in range(60):
            A1, B1 = self.r1.values(y0, x1)
            A2, _ = self.r2.values(B1, x2)
            _, _, B_x, _ = self.r1.first(y0, x1)
            _, A2_y, _, _ = self.r2.first(B1, x2)
            g = x1 - A2
            step = g / (1.0 - A2_y * B_x)
            x1 = x1 - step
            if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(x1))):
                break
        return x1

    def values(self, y0, x2):
        x1 = self.solve(y0, x2)
        A1, B1 = self.r1.values(y0, x1)
        _, B2 = self.r2.values(B1, x2)
        return A1, B2

    def first(self, y0, x2):
        x1 = self.solve(y0, x2)
        _, y1 = self.r1.values(y0, x1)
        A_x, A_y, B_x, B_y = self.r1.first(y0, x1)
        A2_x, A2_y, B2_x, B2_y = self.r2.first(y1, x2)
        D = 1.0 - A2_y * B_x
        return (
            A_x * A2_x / D,
            A_y + A_x * A2_y * B_y / D,
            B2_x + B2_y * B_x * A2_x / D,
            B2_y * B_y / D,
        )


def compose_affine(r1: QuadraticRep, r2: QuadraticRep) -> QuadraticRep:
    """Closed-form implicit pair of the composition of two affine reps."""
    a0, ax, ay = r1.a[:3]
    b0, bx, by = r1.b[:3]
    c0, cx, cy = r2.a[:3]
    d0, dx, dy = r2.b[:3]
    D = 1.0 - cy * bx
    # x1 = k0 + kx x2 + ky y0
    k0 = (c0 + cy * b0) / D
    kx = cx / D
    ky = cy * by / D
    A = (a0 + ax * k0, ax * kx, ay + ax * ky)
    # y1 = b0 + bx x1 + by y0, then B2 = d0 + dx x2 + dy y1
    B = (d0 + dy * (b0 + bx * k0), dx + dy * bx * kx, dy * (by + bx * ky))
    return QuadraticRep(A, B)


# --------------------------------------------------------------------------
# affine-like maps
# --------------------------------------------------------------------------


def _solve_monotone(f, target, lo, hi, iters=80):
    """Vectorised bisection for f(t) = target with f monotone on [lo, hi]."""
    target = np.asarray(target, dtype=float)
    a = np.full(target.shape, lo)
    b = np.full(target.shape, hi)
    fa = f(a) - target
    fb = f(b) - target
    ok = fa * fb <= 0.0
    inc = fb >= fa
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m) - target
        go_right = (fm < 0.0) == inc
        a = np.where(go_right, m, a)
        b = np.where(go_right, b, m)
    out = 0.5 * (a + b)
    return np.where(ok, out, np.nan)


@dataclass(frozen=True)
class AffineLikeMap:
    """Strip map given by its implicit pair, between rectangles R0 and R1."""

    domain: IntervalPair
    codomain: IntervalPair
    rep: ImplicitRep
    n: int = 1

    def __post_init__(self):
        Y, X = self.grid()
        A_x, _, _, B_y = self.rep.first(Y, X)
        for name, v in (("A_x", A_x), ("B_y", B_y)):
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} is not evaluable on the domain")
            if not (np.all(v > 0) or np.all(v < 0)):
                raise ValueError(f"{name} vanishes or changes sign on the domain")
        A, B = self.rep.values(Y, X)
        ls, lu = self.domain.lengths
        ms, mu = self.codomain.lengths
        tol_s = 1e-9 * max(1.0, ls)
        tol_u = 1e-9 * max(1.0, mu)
        if A.min() < self.domain.s[0] - tol_s or A.max() > self.domain.s[1] + tol_s:
            raise ValueError("domain strip leaves its rectangle")
        if B.min() < self.codomain.u[0] - tol_u or B.max() > self.codomain.u[1] + tol_u:
            raise ValueError("image strip leaves its rectangle")

    # evaluation grid over I0^u x I1^s
    def grid(self, n: int = GRID_N):
        ys = np.linspace(*self.domain.u, n)
        xs = np.linspace(*self.codomain.s, n)
        return np.meshgrid(ys, xs, indexing="ij")

    def phi(self, y0):
        """Boundary graphs (phi-, phi+) of the domain strip P over I0^u."""
        lo, hi = self.codomain.s
        a = self.rep.values(y0, np.full(np.shape(y0), lo))[0]
        b = self.rep.values(y0, np.full(np.shape(y0), hi))[0]
        return np.minimum(a, b), np.maximum(a, b)

    def psi(self, x1):
        """Boundary graphs (psi-, psi+) of the image strip Q over I1^s."""
        lo, hi = self.domain.u
        a = self.rep.values(np.full(np.shape(x1), lo), x1)[1]
        b = self.rep.values(np.full(np.shape(x1), hi), x1)[1]
        return np.minimum(a, b), np.maximum(a, b)

    def strip_ranges(self):
        """x-range of P and y-range of Q over their grids."""
        ys = np.linspace(*self.domain.u, GRID_N)
        xs = np.linspace(*self.codomain.s, GRID_N)
        pm, pp = self.phi(ys)
        qm, qp = self.psi(xs)
        return (float(pm.min()), float(pp.max())), (float(qm.min()), float(qp.max()))

    def forward(self, pts):
        """Image of points of P; nan rows for points outside P."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, y0 = pts[:, 0], pts[:, 1]
        lo, hi = self.codomain.s
        x1 = _solve_monotone(lambda t: self.rep.values(y0, t)[0], x0, lo, hi)
        y1 = self.rep.values(y0, np.nan_to_num(x1))[1]
        out = np.stack([x1, y1], axis=1)
        inside = (y0 >= self.domain.u[0]) & (y0 <= self.domain.u[1]) & np.isfinite(x1)
        out[~inside] = np.nan
        return out

    def inverse(self, pts):
        """Preimage of points of Q; nan rows for points outside Q."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x1, y1 = pts[:, 0], pts[:, 1]
        lo, hi = self.domain.u
        y0 = _solve_monotone(lambda t: self.rep.values(t, x1)[1], y1, lo, hi)
        x0 = self.rep.values(np.nan_to_num(y0), x1)[0]
        out = np.stack([x0, y0], axis=1)
        inside = (x1 >= self.codomain.s[0]) & (x1 <= self.codomain.s[1]) & np.isfinite(y0)
        out[~inside] = np.nan
        return out


def _grid_max(F: AffineLikeMap, func, n: int = GRID_N):
    """Max of func(y, x) on the grid plus one local refinement pass."""
    Y, X = F.grid(n)
    vals = func(Y, X)
    flat = int(np.argmax(vals))  # first occurrence in row-major order
    best = float(vals.flat[flat])
    iy, ix = np.unravel_index(flat, vals.shape)
    ys, xs = Y[:, 0], X[0, :]
    y_lo, y_hi = ys[max(iy - 1, 0)], ys[min(iy + 1, n - 1)]
    x_lo, x_hi = xs[max(ix - 1, 0)], xs[min(ix + 1, n - 1)]
    ry, rx = np.meshgrid(np.linspace(y_lo, y_hi, REFINE_N), np.linspace(x_lo, x_hi, REFINE_N), indexing="ij")
    return max(best, float(np.max(func(ry, rx))))


def _grid_min(F, func, n=GRID_N):
    return -_grid_max(F, lambda y, x: -func(y, x), n)


def widths(F: AffineLikeMap):
    """(|P|, |Q|) = (max |A_x|, max |B_y|)."""
    wp = _grid_max(F, lambda y, x: np.abs(F.rep.first(y, x)[0]))
    wq = _grid_max(F, lambda y, x: np.abs(F.rep.first(y, x)[3]))
    if not (math.isfinite(wp) and math.isfinite(wq)):
        raise ValueError("derivative not evaluable")
    return wp, wq


def cone_margins(F: AffineLikeMap, cp: ConeParams):
    """Maxima of lam|A_x| + u0|A_y| and lam|B_y| + v0|B_x|."""
    def s_side(y, x):
        A_x, A_y, _, _ = F.rep.first(y, x)
        return cp.lam * np.abs(A_x) + cp.u0 * np.abs(A_y)

    def u_side(y, x):
        _, _, B_x, B_y = F.rep.first(y, x)
        return cp.lam * np.abs(B_y) + cp.v0 * np.abs(B_x)

    return _grid_max(F, s_side), _grid_max(F, u_side)


def check_cone(F: AffineLikeMap, cp: ConeParams) -> bool:
    ms, mu = cone_margins(F, cp)
    return ms <= 1.0 + TOL and mu <= 1.0 + TOL


def distortion_values(F: AffineLikeMap):
    """Grid maxima of the six distortion quantities, keyed by name."""
    def quantities(y, x):
        A_x, A_y, B_x, B_y = F.rep.first(y, x)
        if np.any(A_x == 0) or np.any(B_y == 0):
            raise ValueError("A_x or B_y vanishes; log-derivatives undefined")
        A_xx, A_xy, A_yy, B_xx, B_xy, B_yy = F.rep.second(y, x)
        return {
            "dx_log_Ax": A_xx / A_x,
            "dy_log_Ax": A_xy / A_x,
            "A_yy": A_yy,
            "dy_log_By": B_yy / B_y,
            "dx_log_By": B_xy / B_y,
            "B_xx": B_xx,
        }

    Y, X = F.grid()
    q = quantities(Y, X)
    return {k: float(np.max(np.abs(v))) for k, v in q.items()}


def width_comparability(F: AffineLikeMap):
    """(max|A_x| / min|A_x|, max|B_y| / min|B_y|)."""
    ratios = []
    for i in (0, 3):
        hi = _grid_max(F, lambda y, x: np.abs(F.rep.first(y, x)[i]))
        lo = _grid_min(F, lambda y, x: np.abs(F.rep.first(y, x)[i]))
        ratios.append(hi / lo)
    return tuple(ratios)


def check_distortion(F: AffineLikeMap, bound: float) -> bool:
    return all(v <= bound + TOL for v in distortion_values(F).values())


@dataclass
class JacobianReport:
    ratio_min: float
    ratio_max: float
    C: float

    @property
    def ok(self) -> bool:
        return self.ratio_min >= 1.0 / self.C - TOL and self.ratio_max <= self.C + TOL


def jacobian_width_check(F: AffineLikeMap, C: float) -> JacobianReport:
    """Compare |Jac F| = |B_y / A_x| with |Q|/|P| pointwise.

    The ratios reported are |Jac F| |P| / |Q|; the inverse Jacobian gives
    the reciprocal ratios, so one range check covers both.
    """
    wp, wq = widths(F)
    scale = wp / wq

    def ratio(y, x):
        A_x, _, _, B_y = F.rep.first(y, x)
        return np.abs(B_y / A_x) * scale

    return JacobianReport(_grid_min(F, ratio), _grid_max(F, ratio), C)


def simple_compose(F: AffineLikeMap, F2: AffineLikeMap, cp: ConeParams) -> AffineLikeMap:
    """F2 o F as an affine-like map from R0 to R2 with n = n + n2."""
    if F.codomain != F2.domain:
        raise ValueError("image rectangle of F must equal domain rectangle of F2")
    if not check_cone(F, cp) or not check_cone(F2, cp):
        raise ValueError("both factors must satisfy the cone condition")
    if isinstance(F.rep, QuadraticRep) and isinstance(F2.rep, QuadraticRep) \
            and F.rep.kind == "linear" and F2.rep.kind == "linear":
        rep = compose_affine(F.rep, F2.rep)
    else:
        ls, lu = F.domain.lengths
        ms, _ = F2.codomain.lengths
        rep = ComposedRep(F.rep, F2.rep, F.codomain.s, steps=(1e-5 * max(lu, 1e-300), 1e-5 * max(ms, 1e-300)))
    # the intermediate point must land inside Q and P2
    ys = np.linspace(*F.domain.u, GRID_N)
    xs = np.linspace(*F2.codomain.s, GRID_N)
    Y, X2 = np.meshgrid(ys, xs, indexing="ij")
    x1 = ComposedRep(F.rep, F2.rep, F.codomain.s).solve(Y, X2)
    s_lo, s_hi = F.codomain.s
    eps = 1e-9 * max(1.0, s_hi - s_lo)
    inside = (x1 >= s_lo - eps) & (x1 <= s_hi + eps)
    if not inside.any():
        raise ValueError("empty composition")
    if not inside.all():
        raise ValueError("composition strip is not full width")
    return AffineLikeMap(F.domain, F2.codomain, rep, F.n + F2.n)


# --------------------------------------------------------------------------
# folding model and parabolic composition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldingModel:
    """Quadratic fold G(x, y) = (x^2 - t + a y, x) from chart_u to chart_s.

    Preimages of vertical strips {x' in [p-, p+]} are parabolic strips
    y = (t + p - x^2)/a with their tip on the axis x = 0; the tip locus is
    that line.
    """

    t: float
    a: float = 0.1
    N0: int = 2
    chart_u: IntervalPair = IntervalPair((-1.0, 1.0), (-1.0, 1.0))
    chart_s: IntervalPair = IntervalPair((-1.0, 1.0), (-1.0, 1.0))

    def __post_init__(self):
        if self.N0 < 2:
            raise ValueError("N0 must be >= 2")
        if self.a == 0.0:
            raise ValueError("a must be nonzero (the fold must be invertible)")

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([x * x - self.t + self.a * y, x], axis=1)

    def inverse(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xp, yp = pts[:, 0], pts[:, 1]
        return np.stack([yp, (xp - yp * yp + self.t) / self.a], axis=1)

    def tip(self, p: float) -> float:
        """Height of the tip of the preimage of the line x' = p."""
        return (self.t + p) / self.a


def delta_distance(Q0, P1, G: FoldingModel) -> float:
    """Signed vertical gap between Q0 and the tip of G^-1(P1).

    ``Q0`` is the y-interval of a horizontal strip in chart_u, ``P1`` the
    x'-interval of a vertical strip in chart_s. Positive when Q0 lies on
    the open side of the parabola, so that it crosses both arms.
    """
    q_lo, q_hi = _interval(Q0)
    p_lo, p_hi = _interval(P1)
    s_lo, s_hi = G.chart_s.s
    if p_lo < s_lo or p_hi > s_hi:
        raise ValueError("P1 lies outside the fold chart")
    return min((G.t + p_lo - G.a * q) / abs(G.a) for q in (q_lo, q_hi))


def gate_inequality(delta: float, P1_width: float, Q0_width: float, mode: str,
                    b: float = 1.0, C: float = 1.0, eta: float = 0.0) -> bool:
    """Numeric core of the two parabolic gates."""
    if delta <= 0.0:
        return False
    if mode == "composition-gate":
        return delta > (P1_width + Q0_width) / b
    if mode == "R7-gate":
        return delta >= (P1_width ** (1.0 - eta) + Q0_width ** (1.0 - eta)) / C
    raise ValueError(f"unknown gate mode {mode!r}")


def _fold_strips(F0: AffineLikeMap, F1: AffineLikeMap, G: FoldingModel):
    if F0.codomain != G.chart_u or F1.domain != G.chart_s:
        raise ValueError("F0 must end in chart_u and F1 must start in chart_s")
    _, Q0 = F0.strip_ranges()
    P1, _ = F1.strip_ranges()
    return Q0, P1


def parabolic_gate(F0: AffineLikeMap, F1: AffineLikeMap, G: FoldingModel, cp: ConeParams,
                   eta: float = 0.0, mode: str = "composition-gate") -> bool:
    Q0, P1 = _fold_strips(F0, F1, G)
    delta = delta_distance(Q0, P1, G)
    wP1, _ = widths(F1)
    _, wQ0 = widths(F0)
    ok = gate_inequality(delta, wP1, wQ0, mode, b=cp.b, C=cp.C, eta=eta)
    if mode == "composition-gate" and ok:
        aux = max(
            _grid_max(F1, lambda y, x: np.abs(F1.rep.first(y, x)[1])),
            _grid_max(F1, lambda y, x: np.abs(F1.rep.second(y, x)[2])),
            _grid_max(F0, lambda y, x: np.abs(F0.rep.first(y, x)[2])),
            _grid_max(F0, lambda y, x: np.abs(F0.rep.second(y, x)[3])),
        )
        ok = aux < cp.b
    return ok


class ParabolicBranchRep(ImplicitRep):
    """One branch of F1 o G o F0, solved for the fold coordinate x1.

    x1 solves h(x1) = x1^2 - t + a B0(y0, x1) - A1(x1, x2) = 0 with the
    sign of ``sign``; then A = A0(y0, x1) and B = B1(x1, x2).
    """

    kind = "branch"

    def __init__(self, F0: AffineLikeMap, F1: AffineLikeMap, G: FoldingModel, sign: int):
        self.r0 = F0.rep
        self.r1 = F1.rep
        self.G = G
        self.sign = 1 if sign > 0 else -1
        lo, hi = G.chart_u.s
        self.bracket = (0.0, hi) if self.sign > 0 else (lo, 0.0)
        self.fd_step = (1e-5 * F0.domain.lengths[1], 1e-5 * F1.codomain.lengths[0])

    def _h(self, y0, x2, x1):
        _, B0 = self.r0.values(y0, x1)
        A1, _ = self.r1.values(x1, x2)
        return x1 * x1 - self.G.t + self.G.a * B0 - A1

    def _hx(self, y0, x2, x1):
        _, _, B0_x, _ = self.r0.first(y0, x1)
        _, A1_y, _, _ = self.r1.first(x1, x2)
        return 2.0 * x1 + self.G.a * B0_x - A1_y

    def solve(self, y0, x2):
        y0, x2 = np.broadcast_arrays(np.asarray(y0, dtype=float), np.asarray(x2, dtype=float))
        lo, hi = self.bracket
        # the inner end of the bracket sits at the tip, where h < 0
        a = np.full(y0.shape, lo if self.sign > 0 else hi)
        b = np.full(y0.shape, hi if self.sign > 0 else lo)
        if np.any(self._h(y0, x2, b) < 0.0):
            raise ValueError("branch leaves the fold chart")
        for _ in range(60):
            m = 0.5 * (a + b)
            neg = self._h(y0, x2, m) < 0.0
            a = np.where(neg, m, a)
            b = np.where(neg, b, m)
        x1 = 0.5 * (a + b)
        for _ in range(3):
            x1 = x1 - self._h(y0, x2, x1) / self._hx(y0, x2, x1)
        return x1

    def values(self, y0, x2):
        x1 = self.solve(y0, x2)
        A0, _ = self.r0.values(y0, x1)
        _, B1 = self.r1.values(x1, x2)
        return A0, B1

    def first(self, y0, x2):
        x1 = self.solve(y0, x2)
        A0_x, A0_y, B0_x, B0_y = self.r0.first(y0, x1)
        A1_x, A1_y, B1_x, B1_y = self.r1.first(x1, x2)
        hx = 2.0 * x1 + self.G.a * B0_x - A1_y
        dx1_dy0 = -self.G.a * B0_y / hx
        dx1_dx2 = A1_x / hx
        return (
            A0_x * dx1_dx2,
            A0_y + A0_x * dx1_dy0,
            B1_x + B1_y * dx1_dx2,
            B1_y * dx1_dy0,
        )


def parabolic_compose(F0: AffineLikeMap, F1: AffineLikeMap, G: FoldingModel, cp: ConeParams,
                      fit: str = "solver", residual_tol: float = 1e-9, n_check: int = 100,
                      distortion_bound: Optional[float] = None):
    """The two branches F+ and F- of F1 o G o F0 through the fold.

    ``fit="grid"`` replaces each solver-backed branch by a tabulated
    representation. Both branches are checked against direct composition on
    ``n_check`` points, for containment in P0 and Q1, for the (lam^2, u0, v0)
    cone condition and for distortion at ``distortion_bound`` (2 D0 when
    omitted).
    """
    bound = 2.0 * cp.D0 if distortion_bound is None else distortion_bound
    P0, _ = F0.strip_ranges()
    _, Q1 = F1.strip_ranges()
    if not parabolic_gate(F0, F1, G, cp, mode="composition-gate"):
        raise ValueError("parabolic composition not allowed")
    out = []
    for sign in (+1, -1):
        rep = ParabolicBranchRep(F0, F1, G, sign)
        if fit == "grid":
            rep = GridRep.sample(rep, F0.domain.u, F1.codomain.s)
        elif fit != "solver":
            raise ValueError(f"unknown fit {fit!r}")
        Fb = AffineLikeMap(F0.domain, F1.codomain, rep, F0.n + G.N0 + F1.n)
        res = branch_residual(Fb, F0, F1, G, n_check)
        if res > residual_tol:
            raise ValueError(f"branch fit residual {res:.3g} exceeds {residual_tol:.3g}")
        (p_lo, p_hi), (q_lo, q_hi) = Fb.strip_ranges()
        if p_lo < P0[0] - 1e-12 or p_hi > P0[1] + 1e-12 or q_lo < Q1[0] - 1e-12 or q_hi > Q1[1] + 1e-12:
            raise ValueError("branch strips are not contained in P0 and Q1")
        if not check_cone(Fb, cp.squared()):
            raise ValueError("branch fails the squared cone condition")
        if not check_distortion(Fb, bound):
            raise ValueError("branch fails the distortion bound")
        out.append(Fb)
    return out[0], out[1]


def branch_residual(Fb: AffineLikeMap, F0, F1, G, n: int = 100, seed: int = 0) -> float:
    """Max distance between the branch map and F1(G(F0(.))) on seeded points."""
    rng = np.random.default_rng(seed)
    y0 = rng.uniform(*Fb.domain.u, n)
    x2 = rng.uniform(*Fb.codomain.s, n)
    x0, y2 = Fb.rep.values(y0, x2)
    direct = F1.forward(G(F0.forward(np.stack([x0, y0], 1))))
    want = np.stack([x2, y2], 1)
    return float(np.max(np.abs(direct - want)))


def injective_on_samples(F: AffineLikeMap, n: int = 400, seed: int = 0) -> bool:
    """Distinct sampled points of P have distinct images."""
    rng = np.random.default_rng(seed)
    y0 = rng.uniform(*F.domain.u, n)
    x1 = rng.uniform(*F.codomain.s, n)
    x0, y1 = F.rep.values(y0, x1)
    src = np.stack([x0, y0], 1)
    dst = np.stack([x1, y1], 1)
    d_src = np.linalg.norm(src[:, None] - src[None], axis=-1)
    d_dst = np.linalg.norm(dst[:, None] - dst[None], axis=-1)
    off = ~np.eye(n, dtype=bool)
    return bool(np.all(d_dst[off & (d_src > 1e-9)] > 0.0))


# --------------------------------------------------------------------------
# key-value map files
# --------------------------------------------------------------------------


def _floats(text: str):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def parse_kv(text: str) -> dict:
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed line {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def map_from_kv(text: str) -> AffineLikeMap:
    """Build a map from ``key=value`` lines.

    Keys: kind (linear|quadratic|grid), domain_s, domain_u, codomain_s,
    codomain_u, n; A and B coefficient lists (c,cx,cy,cxx,cxy,cyy) for the
    closed-form kinds; grid_y, grid_x, A_values, B_values for grids.
    """
    kv = parse_kv(text)
    try:
        kind = kv["kind"]
        dom = IntervalPair(_floats(kv["domain_s"]), _floats(kv["domain_u"]))
        cod = IntervalPair(_floats(kv["codomain_s"]), _floats(kv["codomain_u"]))
        n = int(kv.get("n", "1"))
        if kind in ("linear", "quadratic"):
            A, B = _floats(kv["A"]), _floats(kv["B"])
            if len(A) > 6 or len(B) > 6:
                raise ValueError("at most six coefficients per function")
            rep = QuadraticRep(A, B)
            if kind == "linear" and rep.kind != "linear":
                raise ValueError("linear map with quadratic coefficients")
        elif kind == "grid":
            ys, xs = _floats(kv["grid_y"]), _floats(kv["grid_x"])
            A = np.array(_floats(kv["A_values"])).reshape(len(ys), len(xs))
            B = np.array(_floats(kv["B_values"])).reshape(len(ys), len(xs))
            rep = GridRep(ys, xs, A, B)
        else:
            raise ValueError(f"unknown kind {kind!r}")
    except KeyError as exc:
        raise ValueError(f"missing key {exc.args[0]!r}") from None
    return AffineLikeMap(dom, cod, rep, n)


def _fmt(vals) -> str:
    return ",".join(repr(float(v)) for v in np.ravel(vals))


def map_to_kv(F: AffineLikeMap, grid_n: int = 33) -> str:
    """Serialise a map; anything outside the closed-form family goes to a grid."""
    lines = [
        f"domain_s={_fmt(F.domain.s)}",
        f"domain_u={_fmt(F.domain.u)}",
        f"codomain_s={_fmt(F.codomain.s)}",
        f"codomain_u={_fmt(F.codomain.u)}",
        f"n={F.n}",
    ]
    rep = F.rep
    if isinstance(rep, QuadraticRep):
        lines.insert(0, f"kind={rep.kind}")
        lines += [f"A={_fmt(rep.a)}", f"B={_fmt(rep.b)}"]
    else:
        g = rep if isinstance(rep, GridRep) else GridRep.sample(rep, F.domain.u, F.codomain.s, grid_n)
        lines.insert(0, "kind=grid")
        lines += [f"grid_y={_fmt(g.ys)}", f"grid_x={_fmt(g.xs)}",
                  f"A_values={_fmt(g.A_table)}", f"B_values={_fmt(g.B_table)}"]
    return "\n".join(lines) + "\n"


def linear_map(mu: float, sigma: float, domain=None, codomain=None, x_offset: float = 0.0,
               y_offset: float = 0.0, n: int = 1) -> AffineLikeMap:
    """The map (x, y) -> (mu (x - x_offset), sigma y + y_offset) in implicit form."""
    dom = domain or IntervalPair((0.0, 1.0), (0.0, 1.0))
    cod = codomain or IntervalPair((0.0, 1.0), (0.0, 1.0))
    rep = QuadraticRep((x_offset, 1.0 / mu, 0.0), (y_offset, 0.0, sigma))
    return AffineLikeMap(dom, cod, rep, n)


def random_cone_map(rng, cp: ConeParams, quadratic: float = 0.0, rect=None, max_tries: int = 1000) -> AffineLikeMap:
    """Seeded random closed-form map of the unit rectangle passing the cone test.

    Linear parts are drawn inside the cone with some slack, then up to
    ``quadratic`` times random second-order terms are added; draws that
    leave the rectangle or fail the cone test are redrawn.
    """
    R = rect or IntervalPair((0.0, 1.0), (0.0, 1.0))
    for _ in range(max_tries):
        # |ax| and |ay| share the budget lam|ax| + u0|ay| <= 1 - slack
        sa, sb = rng.uniform(0.1, 0.95, 2)
        ta, tb = rng.uniform(0.0, 1.0, 2)
        ax = sa * ta / cp.lam * rng.choice([-1.0, 1.0])
        ay = sa * (1.0 - ta) / cp.u0 * rng.choice([-1.0, 1.0])
        by = sb * tb / cp.lam * rng.choice([-1.0, 1.0])
        bx = sb * (1.0 - tb) / cp.v0 * rng.choice([-1.0, 1.0])
        if abs(ax) < 1e-3 or abs(by) < 1e-3:
            continue
        qa = quadratic * rng.uniform(-1.0, 1.0, 3)
        qb = quadratic * rng.uniform(-1.0, 1.0, 3)
        rep = QuadraticRep((0.0, ax, ay, *qa), (0.0, bx, by, *qb))
        ys = np.linspace(*R.u, GRID_N)
        xs = np.linspace(*R.s, GRID_N)
        Y, X = np.meshgrid(ys, xs, indexing="ij")
        A, B = rep.values(Y, X)
        spanA, spanB = A.max() - A.min(), B.max() - B.min()
        if spanA > R.lengths[0] or spanB > R.lengths[1]:
            continue
        a0 = R.s[0] - A.min() + rng.uniform(0.0, R.lengths[0] - spanA)
        b0 = R.u[0] - B.min() + rng.uniform(0.0, R.lengths[1] - spanB)
        rep.a[0], rep.b[0] = a0, b0
        try:
            F = AffineLikeMap(R, R, rep)
        except ValueError:
            continue
        if check_cone(F, cp):
            return F
    raise RuntimeError("no cone map found")
