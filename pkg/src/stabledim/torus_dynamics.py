"""Standard family on the two-torus and a Kakutani-Rokhlin tower builder.

The tower V for height N, radius eta and centers x_1..x_m is

    V = U_i U_{0<=j<N} phi^j(B(x_i, eta))  minus  U_i closed B(x_i, eta),

and no point has its N backward iterates all inside V. Membership is
evaluated exactly per point by pulling the point back along its orbit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

TWO_PI = 2.0 * math.pi


def wrap(a):
    """Reduce mod 1 into [0, 1); np.mod can return 1.0 for tiny negatives."""
    r = np.mod(a, 1.0)
    return np.where(r >= 1.0, 0.0, r)


def torus_delta(a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return d - np.round(d)


def torus_dist(a, b):
    return np.linalg.norm(torus_delta(a, b), axis=-1)


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        x, y = wrap(np.array([float(self.x), float(self.y)]))
        object.__setattr__(self, "x", float(x))
        object.__setattr__(self, "y", float(y))

    def as_array(self):
        return np.array([self.x, self.y])

    def dist(self, other: "TorusPoint") -> float:
        return float(torus_dist(self.as_array(), other.as_array()))


@dataclass(frozen=True)
class StandardMapParams:
    """phi(x, y) = (-y + 2x + lam sin(2 pi x), x) mod 1."""

    lam: float

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be a finite real >= 0")

    def forward(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([wrap(-y + 2.0 * x + self.lam * np.sin(TWO_PI * x)), wrap(x)], axis=-1)

    def inverse(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([wrap(y), wrap(2.0 * y + self.lam * np.sin(TWO_PI * y) - x)], axis=-1)

    def lift(self, pts):
        """Forward map on the plane, without reduction."""
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([-y + 2.0 * x + self.lam * np.sin(TWO_PI * x), x], axis=-1)

    def jacobian(self, pts):
        pts = np.asarray(pts, dtype=float)
        J = np.zeros(pts.shape[:-1] + (2, 2))
        J[..., 0, 0] = 2.0 + TWO_PI * self.lam * np.cos(TWO_PI * pts[..., 0])
        J[..., 0, 1] = -1.0
        J[..., 1, 0] = 1.0
        return J


def std_map(p: TorusPoint, params: StandardMapParams) -> TorusPoint:
    return TorusPoint(*params.forward(p.as_array()))


def std_map_inv(p: TorusPoint, params: StandardMapParams) -> TorusPoint:
    return TorusPoint(*params.inverse(p.as_array()))


def iterate(pts, params: StandardMapParams, n: int):
    """phi^n for any integer n."""
    p = np.asarray(pts, dtype=float)
    step = params.forward if n >= 0 else params.inverse
    for _ in range(abs(n)):
        p = step(p)
    return p


def backward_orbit(pts, params: StandardMapParams, length: int):
    """Array of shape (length, n, 2) holding phi^-j(pts), j = 0..length-1."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.empty((length,) + pts.shape)
    out[0] = wrap(pts)
    for j in range(1, length):
        out[j] = params.inverse(out[j - 1])
    return out


# --------------------------------------------------------------------------
# periodic points
# --------------------------------------------------------------------------


def periodic_points(params: StandardMapParams, max_period: int, seed_grid: int = 40,
                    tol: float = 1e-10, newton_steps: int = 60):
    """Periodic points found by Newton on phi^m(p) - p = 0 from a seed grid.

    The residual is taken modulo integer translations. Each point is listed
    once with the least period found. Seeds that do not converge are
    dropped, so the list need not be complete.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    c = (np.arange(seed_grid) + 0.5) / seed_grid
    seeds = np.stack(np.meshgrid(c, c, indexing="ij"), -1).reshape(-1, 2)
    found = []
    eye = np.eye(2)
    for m in range(1, max_period + 1):
        z = seeds.copy()
        with np.errstate(all="ignore"):
            for _ in range(newton_steps):
                p = z.copy()
                J = np.broadcast_to(eye, z.shape[:-1] + (2, 2)).copy()
                for _ in range(m):
                    J = params.jacobian(p) @ J
                    p = params.lift(p)
                r = torus_delta(p, z)
                step = np.einsum("nij,nj->ni", np.linalg.pinv(J - eye), r)
                step = np.nan_to_num(step, nan=0.0, posinf=0.0, neginf=0.0)
                z = wrap(z - step)
        res = torus_dist(iterate(z, params, m), z)
        for q, rq in zip(z, res):
            if not rq < tol:
                continue
            if all(torus_dist(q, o) > 1e-7 for o, _ in found):
                found.append((q, m))
    return [(TorusPoint(*q), m) for q, m in found]


# --------------------------------------------------------------------------
# regions
# --------------------------------------------------------------------------


class TorusRegion:
    """Region of the torus with a vectorised membership test."""

    def contains(self, pts) -> np.ndarray:
        raise NotImplementedError

    def __contains__(self, p: TorusPoint) -> bool:
        return bool(self.contains(p.as_array()[None])[0])

    def area(self, samples: int = 10**6, seed: int = 0, chunk: int = 100_000):
        """Seeded Monte Carlo estimate and standard error."""
        rng = np.random.default_rng(seed)
        hits = 0
        done = 0
        while done < samples:
            k = min(chunk, samples - done)
            hits += int(self.contains(rng.random((k, 2))).sum())
            done += k
        p = hits / samples
        return p, math.sqrt(max(p * (1 - p), 0.0) / samples)

    def __or__(self, other):
        return Union((self, other))

    def __sub__(self, other):
        return Difference(self, other)

    def __invert__(self):
        return Complement(self)


class Whole(TorusRegion):
    def contains(self, pts):
        return np.ones(np.atleast_2d(pts).shape[0], dtype=bool)


@dataclass(eq=False)
class Ball(TorusRegion):
    center: Sequence[float]
    radius: float
    closed: bool = False

    def contains(self, pts):
        d = torus_dist(np.atleast_2d(pts), np.asarray(self.center, dtype=float))
        return d <= self.radius if self.closed else d < self.radius


@dataclass(eq=False)
class Rect(TorusRegion):
    """Axis-aligned [x0, x1) x [y0, y1) inside the unit square."""

    x0: float
    x1: float
    y0: float
    y1: float

    def contains(self, pts):
        p = wrap(np.atleast_2d(np.asarray(pts, dtype=float)))
        return (p[:, 0] >= self.x0) & (p[:, 0] < self.x1) & (p[:, 1] >= self.y0) & (p[:, 1] < self.y1)

    @property
    def lebesgue(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(eq=False)
class ForwardImage(TorusRegion):
    """phi^j(region), tested by pulling the query back j steps."""

    region: TorusRegion
    params: StandardMapParams
    j: int

    def contains(self, pts):
        return self.region.contains(iterate(np.atleast_2d(pts), self.params, -self.j))


@dataclass(eq=False)
class Union(TorusRegion):
    parts: tuple

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        out = np.zeros(pts.shape[0], dtype=bool)
        for p in self.parts:
            out |= p.contains(pts)
        return out


@dataclass(eq=False)
class Difference(TorusRegion):
    a: TorusRegion
    b: TorusRegion

    def contains(self, pts):
        return self.a.contains(pts) & ~self.b.contains(pts)


@dataclass(eq=False)
class Complement(TorusRegion):
    a: TorusRegion

    def contains(self, pts):
        return ~self.a.contains(pts)


class TowerRegion(TorusRegion):
    """The tower set V, evaluated on backward orbits with a periodic KD-tree."""

    def __init__(self, centers, eta: float, N: int, params: StandardMapParams):
        self.centers = wrap(np.atleast_2d(np.asarray(centers, dtype=float)).reshape(-1, 2))
        self.eta = float(eta)
        self.N = int(N)
        self.params = params
        self._tree = cKDTree(self.centers, boxsize=1.0) if len(self.centers) else None

    def _ball_flags(self, pts):
        if self._tree is None:
            z = np.zeros(pts.shape[0], dtype=bool)
            return z, z
        d, _ = self._tree.query(pts, distance_upper_bound=2.0 * self.eta)
        return d < self.eta, d <= self.eta

    def _membership(self, orbit):
        """V-membership of orbit[j] for j = 0..N-1 from an orbit of length 2N-1."""
        L, n, _ = orbit.shape
        N = self.N
        open_b, closed_b = self._ball_flags(orbit.reshape(-1, 2))
        open_b = open_b.reshape(L, n)
        closed_b = closed_b.reshape(L, n)
        c = np.zeros((L + 1, n), dtype=np.int64)
        np.cumsum(open_b, axis=0, out=c[1:])
        j = np.arange(N)
        # some return to an open base ball at a step in [1, N-1]
        returns = (c[j + N] - c[j + 1]) > 0
        return ~closed_b[:N] & returns

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        orbit = backward_orbit(pts, self.params, self.N)
        # only row 0 is needed and its window ends at row N-1; pad the rest
        pad = np.repeat(orbit[-1:], self.N - 1, axis=0)
        return self._membership(np.concatenate([orbit, pad]))[0]

    def escape_times(self, pts):
        """First j in [0, N) with phi^-j(z) outside V, or -1 if none."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        orbit = backward_orbit(pts, self.params, 2 * self.N - 1)
        inside = self._membership(orbit)
        out_of_v = ~inside
        first = np.argmax(out_of_v, axis=0)
        return np.where(out_of_v.any(axis=0), first, -1)

    def expand(self) -> TorusRegion:
        """Equivalent expression tree, for small cases."""
        floors = tuple(
            ForwardImage(Ball(c, self.eta), self.params, j) for c in self.centers for j in range(self.N)
        )
        bases = tuple(Ball(c, self.eta, closed=True) for c in self.centers)
        return Difference(Union(floors), Union(bases))


# --------------------------------------------------------------------------
# tower parameters
# --------------------------------------------------------------------------


def height_budget(N: int) -> float:
    return 1.0 / math.sqrt(N) + math.exp(-math.sqrt(N))


def minimal_height(eps: float) -> int:
    """Smallest N with 1/sqrt(N) + exp(-sqrt(N)) < eps/2."""
    N = 1
    while not height_budget(N) < eps / 2.0:
        N += 1
    return N


def _validate_eps(eps):
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class TowerSpec:
    N: int
    delta: float
    mu: float
    eta: float
    m: int
    eps: float
    periodic: np.ndarray
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not (self.delta / 2.0 > self.mu > self.eta > 0.0):
            raise ValueError("need delta/2 > mu > eta > 0")

    @staticmethod
    def auto_m(N: int, eta: float) -> int:
        return int(math.floor(1.0 / (math.pi * math.sqrt(N) * eta * eta)))

    def to_kv(self) -> str:
        def pts(a):
            return ";".join(f"{float(x)!r},{float(y)!r}" for x, y in np.asarray(a).reshape(-1, 2))
        return "\n".join([
            f"N={self.N}", f"eps={float(self.eps)!r}", f"delta={float(self.delta)!r}",
            f"mu={float(self.mu)!r}", f"eta={float(self.eta)!r}", f"m={self.m}", f"periodic={pts(self.periodic)}",
            f"centers={pts(self.centers)}",
        ]) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "TowerSpec":
        kv = {}
        for line in text.splitlines():
            if line.strip():
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()

        def pts(s):
            if not s:
                return np.zeros((0, 2))
            return np.array([[float(t) for t in item.split(",")] for item in s.split(";")])

        return cls(int(kv["N"]), float(kv["delta"]), float(kv["mu"]), float(kv["eta"]), int(kv["m"]),
                   float(kv["eps"]), pts(kv["periodic"]), pts(kv.get("centers", "")))


def _point_array(points):
    """Accept TorusPoints, (TorusPoint, period) pairs or raw coordinates."""
    rows = []
    for p in points:
        if isinstance(p, tuple) and p and isinstance(p[0], TorusPoint):
            p = p[0]
        rows.append(p.as_array() if isinstance(p, TorusPoint) else np.asarray(p, dtype=float))
    return np.array(rows, dtype=float).reshape(-1, 2)


def _kd(points):
    pts = wrap(np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, 2))
    return cKDTree(pts, boxsize=1.0) if len(pts) else None


def _dist_to(tree, pts):
    if tree is None:
        return np.full(len(pts), np.inf)
    return tree.query(pts)[0]


def ball_stencil(centers, eta: float, n_angles: int = 8):
    """Center plus rings at 0.5 and 0.999 of the radius; shape (n, 1 + 2 n_angles, 2)."""
    centers = np.atleast_2d(centers)
    ang = np.linspace(0.0, TWO_PI, n_angles, endpoint=False)
    ring = np.stack([np.cos(ang), np.sin(ang)], 1)
    offs = np.concatenate([np.zeros((1, 2)), 0.5 * eta * ring, 0.999 * eta * ring])
    return wrap(centers[:, None, :] + offs[None])


def returns_to_ball(centers, eta: float, N: int, params: StandardMapParams):
    """Sampled test: some stencil point of B(c, eta) re-enters it within N-1 steps."""
    centers = np.atleast_2d(centers)
    p = ball_stencil(centers, eta)
    bad = np.zeros(len(centers), dtype=bool)
    for _ in range(1, N):
        p = params.forward(p)
        bad |= (torus_dist(p, centers[:, None, :]) <= eta).any(axis=1)
    return bad


def _sample_outside(rng, tree, radius, n):
    """n uniform points at distance >= radius from the tree points, plus acceptance rate."""
    out = []
    tried = accepted = 0
    while accepted < n:
        z = rng.random((max(2 * (n - accepted), 1024), 2))
        ok = _dist_to(tree, z) >= radius
        tried += len(z)
        accepted += int(ok.sum())
        out.append(z[ok])
    pts = np.concatenate(out)[:n]
    return pts, accepted / tried


def tower_params(params: StandardMapParams, eps: float, N: int, periodic, seed: int = 0,
                 samples: int = 20_000, audit_tol: float = 0.1, return_tol: float = 0.25,
                 audit_points: int = 4000) -> TowerSpec:
    """Radii delta > 2 mu > 2 eta for a tower of height N.

    delta: halved from 0.1 until the sampled Leb(V_delta(K)) + 3 SE < eps/2.
    mu: halved from delta/2 until at most ``audit_tol`` of sampled
    delta-far points have a backward N-orbit entering V_{2 mu}(K).
    eta: halved from 0.9 mu until at most ``return_tol`` of sampled
    candidate balls return to themselves within N-1 steps.
    """
    _validate_eps(eps)
    if not height_budget(N) < eps / 2.0:
        raise ValueError(f"N = {N} too small for eps = {eps}; minimal admissible N = {minimal_height(eps)}")
    K = _point_array(periodic)
    tree = _kd(K)
    rng = np.random.default_rng(seed)
    S = rng.random((samples, 2))
    dS = _dist_to(tree, S)

    delta = 0.1
    while True:
        p = float(np.mean(dS < delta))
        se = math.sqrt(p * (1 - p) / samples)
        if p + 3 * se < eps / 2.0:
            break
        delta /= 2.0
        if delta < 1e-9:
            raise RuntimeError("no delta found; periodic set too dense")
    leb_vdelta = p

    far = S[dS >= delta][:audit_points]
    mind = np.full(len(far), np.inf)
    pts = far
    for _ in range(N):
        mind = np.minimum(mind, _dist_to(tree, pts))
        pts = params.inverse(pts)
    mu = delta / 2.0
    while np.mean(mind < 2.0 * mu) > audit_tol:
        mu /= 2.0
    # delta/2 > mu strictly
    if mu >= delta / 2.0:
        mu = 0.5 * delta * (1.0 - 1e-9)
    audit = float(np.mean(mind < 2.0 * mu))

    cand, _ = _sample_outside(rng, tree, mu, 2000)
    eta = 0.9 * mu
    while True:
        fail = float(np.mean(returns_to_ball(cand, eta, N, params)))
        if fail <= return_tol:
            break
        eta /= 2.0
        if eta < 1e-9:
            raise RuntimeError("no eta found; balls keep returning")
    m = TowerSpec.auto_m(N, eta)
    diag = {"leb_vdelta": leb_vdelta, "leb_vdelta_se": se, "audit_fraction": audit,
            "return_fraction": fail}
    return TowerSpec(N, delta, mu, eta, m, eps, K, diagnostics=diag)


# --------------------------------------------------------------------------
# center selection
# --------------------------------------------------------------------------


class _CandidatePool:
    """Admissible candidate centers (outside V_mu(K), no early return), drawn in bulk."""

    def __init__(self, rng, tree, spec: TowerSpec, params, bulk: int):
        self.rng, self.tree, self.spec, self.params, self.bulk = rng, tree, spec, params, bulk
        self.buf = np.zeros((0, 2))
        self.drawn = self.rejected_return = 0

    def take(self, k):
        while len(self.buf) < k:
            z, _ = _sample_outside(self.rng, self.tree, self.spec.mu, self.bulk)
            bad = returns_to_ball(z, self.spec.eta, self.spec.N, self.params)
            self.drawn += len(z)
            self.rejected_return += int(bad.sum())
            self.buf = np.concatenate([self.buf, z[~bad]])
        out, self.buf = self.buf[:k], self.buf[k:]
        return out


def select_centers(spec: TowerSpec, params: StandardMapParams, candidate_batch: int = 16,
                   seed: int = 0, cloud: int = 40_000, retries: int = 20) -> TowerSpec:
    """Greedy best-of-batch centers covering Y_0 = T^2 minus V_delta(K).

    Coverage is counted on a seeded cloud of points of Y_0: a candidate c
    covers z when some phi^-j(z), 0 <= j < N, lies in B(c, eta). Each pick
    must cover at least half of the expected count pi N eta^2 |Y| unless that
    expectation is below two points.
    """
    rng = np.random.default_rng(seed)
    ktree = _kd(spec.periodic)
    N, eta = spec.N, spec.eta
    Z, leb_y0 = _sample_outside(rng, ktree, spec.delta, cloud)
    orbit = backward_orbit(Z, params, N).reshape(-1, 2)
    tree = cKDTree(orbit, boxsize=1.0)
    n = len(Z)
    covered = np.zeros(n, dtype=bool)
    a = math.pi * N * eta * eta
    pool = _CandidatePool(rng, ktree, spec, params, bulk=max(4096, 64 * candidate_batch))
    centers = np.zeros((spec.m, 2))
    residual = [leb_y0]
    shortfalls = 0
    for i in range(spec.m):
        uncovered = n - int(covered.sum())
        expected = a * uncovered
        for attempt in range(retries):
            cand = pool.take(candidate_batch)
            hits = tree.query_ball_point(cand, eta)
            best, best_idx, best_count = 0, None, -1
            for k, h in enumerate(hits):
                idx = np.unique(np.asarray(h, dtype=np.int64) % n)
                cnt = int((~covered[idx]).sum())
                if cnt > best_count:
                    best, best_idx, best_count = k, idx, cnt
            if expected < 2.0 or best_count >= 0.5 * expected:
                break
            shortfalls += 1
        else:
            raise RuntimeError(
                f"step {i}: best candidate covered {best_count} cloud points, "
                f"needed {0.5 * expected:.1f} (uncovered {uncovered})")
        centers[i] = cand[best]
        covered[best_idx] = True
        residual.append(leb_y0 * (n - int(covered.sum())) / n)
    diag = dict(spec.diagnostics)
    diag.update({"leb_y0": leb_y0, "cloud": n, "residual": residual, "retries": shortfalls,
                 "candidates_drawn": pool.drawn, "candidates_returning": pool.rejected_return})
    return replace(spec, centers=centers, diagnostics=diag)


def residual_trajectory_ok(spec: TowerSpec) -> bool:
    """Recorded residual after i picks is at most 2 (1 - pi N eta^2 / 2)^i."""
    r = spec.diagnostics.get("residual", [])
    q = 1.0 - math.pi * spec.N * spec.eta**2 / 2.0
    return all(v <= 2.0 * q**i + 1e-15 for i, v in enumerate(r))


def residual_poisson_ok(spec: TowerSpec) -> bool:
    """Uncovered cloud count is consistent with a residual below exp(-sqrt N)."""
    d = spec.diagnostics
    n = d["cloud"]
    count = d["residual"][-1] / d["leb_y0"] * n
    lam = math.exp(-math.sqrt(spec.N)) * n
    return count <= lam + 3.0 * math.sqrt(lam) + 1.0


# --------------------------------------------------------------------------
# tower assembly and verification
# --------------------------------------------------------------------------


@dataclass
class TowerDiagnostics:
    complement: float
    complement_se: float
    bound: float
    leb_vdelta: float
    base_term: float
    residual_term: float
    disjoint_ok: bool
    budget_ok: dict
    exp_term: float = 0.0

    @property
    def ok(self) -> bool:
        return self.disjoint_ok and all(self.budget_ok.values()) and self.complement < self.bound

    @property
    def residual_within_exp(self) -> bool:
        """Informational: greedy residual below its own exp(-sqrt N) share."""
        return self.residual_term <= self.exp_term


def build_tower(spec: TowerSpec, params: StandardMapParams, area_samples: int = 20_000,
                seed: int = 0):
    """Region V of the tower plus budget diagnostics.

    Raises if a selected center's ball returns to itself within N-1 steps,
    which would make its floors overlap.
    """
    if len(spec.centers) == 0:
        raise ValueError("no centers selected")
    bad = returns_to_ball(spec.centers, spec.eta, spec.N, params)
    if bad.any():
        raise RuntimeError(f"floors of tower {int(np.argmax(bad))} overlap; eta too large")
    V = TowerRegion(spec.centers, spec.eta, spec.N, params)
    rng = np.random.default_rng(seed)
    pts = rng.random((area_samples, 2))
    comp = float(np.mean(~V.contains(pts)))
    comp_se = math.sqrt(comp * (1 - comp) / area_samples)
    N = spec.N
    bound = spec.eps / 2.0 + height_budget(N)
    base = len(spec.centers) * math.pi * spec.eta**2
    resid = spec.diagnostics.get("residual", [float("nan")])[-1]
    leb_vd = spec.diagnostics.get("leb_vdelta", float("nan"))
    # the greedy residual is not individually below exp(-sqrt N) when K holds
    # only low periods, so it is charged together with Leb(V_delta)
    budget = {
        "vdelta": leb_vd < spec.eps / 2.0,
        "base": base <= 1.0 / math.sqrt(N),
        "vdelta_plus_residual": leb_vd + resid <= spec.eps / 2.0 + math.exp(-math.sqrt(N)),
    }
    diag = TowerDiagnostics(comp, comp_se, bound, leb_vd, base, resid, True, budget,
                            math.exp(-math.sqrt(N)))
    return V, diag


@dataclass
class EmptinessReport:
    samples: int
    counterexamples: int
    escape_times: np.ndarray
    points: np.ndarray

    @property
    def histogram(self):
        t = self.escape_times[self.escape_times >= 0]
        return np.bincount(t) if len(t) else np.zeros(0, dtype=int)

    @property
    def complement(self) -> float:
        """Fraction of samples outside V (escape time 0)."""
        return float(np.mean(self.escape_times == 0))

    def rows(self):
        for i, ((x, y), t) in enumerate(zip(self.points, self.escape_times)):
            yield i, x, y, int(t), int(t >= 0)


def verify_empty_intersection(V: TorusRegion, N: int, params: StandardMapParams,
                              samples: int, seed: int, chunk: int = 10_000) -> EmptinessReport:
    """Escape time of seeded points: first j < N with phi^-j(z) outside V."""
    rng = np.random.default_rng(seed)
    Z = rng.random((samples, 2))
    times = np.empty(samples, dtype=np.int64)
    fast = isinstance(V, TowerRegion) and V.N == N
    for s in range(0, samples, chunk):
        z = Z[s:s + chunk]
        if fast:
            times[s:s + chunk] = V.escape_times(z)
            continue
        t = np.full(len(z), -1, dtype=np.int64)
        p = z
        for j in range(N):
            out = ~V.contains(p) & (t < 0)
            t[out] = j
            p = params.inverse(p)
        times[s:s + chunk] = t
    return EmptinessReport(samples, int(np.sum(times < 0)), times, Z)


# --------------------------------------------------------------------------
# averaging identity
# --------------------------------------------------------------------------


@dataclass
class AveragingReport:
    mean: float
    se: float
    target: float

    @property
    def ok(self) -> bool:
        return abs(self.mean - self.target) <= 3.0 * self.se


def averaging_check(params: StandardMapParams, N: int, eta: float, Y: Rect, n_x: int = 1000,
                    n_u: int = 64, seed: int = 0) -> AveragingReport:
    """Mean over x of Leb(Y n U_{j<N} phi^j B(x, eta)) against N pi eta^2 Leb(Y).

    For each x the union is measured through its floors: by area
    preservation Leb(phi^j B minus earlier floors, inside Y) is pi eta^2
    times the fraction of u in B with phi^j u in Y and no return of u to B
    in steps 1..j.
    """
    rng = np.random.default_rng(seed)
    x = rng.random((n_x, 2))
    r = eta * np.sqrt(rng.random((n_x, n_u)))
    th = TWO_PI * rng.random((n_x, n_u))
    p = wrap(x[:, None, :] + np.stack([r * np.cos(th), r * np.sin(th)], -1))
    alive = np.ones((n_x, n_u), dtype=bool)
    acc = np.zeros((n_x, n_u))
    for j in range(N):
        if j > 0:
            alive &= torus_dist(p, x[:, None, :]) >= eta
        acc += alive & Y.contains(p.reshape(-1, 2)).reshape(n_x, n_u)
        p = params.forward(p)
    vals = math.pi * eta * eta * acc.mean(axis=1)
    return AveragingReport(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_x)),
                           N * math.pi * eta * eta * Y.lebesgue)


# --------------------------------------------------------------------------
# maximal invariant sets on a grid
# --------------------------------------------------------------------------


@dataclass
class GridField:
    cells: np.ndarray  # bool, indexed [i, j] for the cell centered at ((i+.5)/g, (j+.5)/g)
    horizon: int

    @property
    def count(self) -> int:
        return int(self.cells.sum())

    def to_pgm(self) -> bytes:
        g = self.cells.shape[0]
        img = np.where(self.cells.T[::-1], 0, 255).astype(np.uint8)
        return f"P5\n{g} {g}\n255\n".encode() + img.tobytes()


def grid_centers(grid: int):
    c = (np.arange(grid) + 0.5) / grid
    return np.stack(np.meshgrid(c, c, indexing="ij"), -1).reshape(-1, 2)


def max_invariant_escape(U: TorusRegion, params: StandardMapParams, horizon: int, grid: int) -> GridField:
    """Cells whose centers stay in U for all iterates |k| <= horizon."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    z = grid_centers(grid)
    alive = U.contains(z)
    f = b = z
    for _ in range(horizon):
        f = params.forward(f)
        b = params.inverse(b)
        alive &= U.contains(f) & U.contains(b)
    return GridField(alive.reshape(grid, grid), horizon)


def containment_holds(U_tilde: TorusRegion, U: TorusRegion, params: StandardMapParams, N: int,
                      samples: int = 20_000, seed: int = 0) -> bool:
    """Sampled check that phi^-n(U~) lies in U for |n| <= N."""
    rng = np.random.default_rng(seed)
    z = rng.random((samples, 2))
    q = z[U_tilde.contains(z)]
    if len(q) == 0:
        return True
    f = b = q
    ok = U.contains(q).all()
    for _ in range(N):
        f = params.forward(f)
        b = params.inverse(b)
        ok = ok and U.contains(f).all() and U.contains(b).all()
    return bool(ok)


@dataclass
class CombinationReport:
    containment: bool
    surviving_w: int
    surviving_u: int
    violations: int

    @property
    def ok(self) -> bool:
        return self.containment and self.violations == 0


def combination_check(U: TorusRegion, U_tilde: TorusRegion, V: TorusRegion, params: StandardMapParams,
                      N: int, horizon: int, grid: int, samples: int = 20_000, seed: int = 0) -> CombinationReport:
    """Cells surviving W = U~ u V at horizon H must survive U at horizon H - N."""
    if horizon <= N:
        raise ValueError("horizon must exceed N")
    cont = containment_holds(U_tilde, U, params, N, samples, seed)
    W = Union((U_tilde, V))
    sw = max_invariant_escape(W, params, horizon, grid)
    su = max_invariant_escape(U, params, horizon - N, grid)
    viol = int(np.sum(sw.cells & ~su.cells))
    return CombinationReport(cont, sw.count, su.count, viol)
