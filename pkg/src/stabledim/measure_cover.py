"""Dyadic-square covers of planar regions and their diameter sums.

Squares at depth k have side 2^-k and corners on the lattice Z^2 / 2^k.
A square joins the cover when the region fills at least ``fill_fraction``
of it; rejected squares that still meet the region are split into their
four children, down to ``max_depth``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

C_UNIVERSAL = 170.0 * math.pi
SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------------
# dyadic squares
# --------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class DyadicSquare:
    """The square [i/2^k, (i+1)/2^k] x [j/2^k, (j+1)/2^k]."""

    k: int
    i: int
    j: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("depth must be nonnegative")

    @property
    def side(self) -> float:
        return math.ldexp(1.0, -self.k)

    @property
    def diameter(self) -> float:
        return SQRT2 * self.side

    @property
    def bounds(self):
        s = self.side
        return (self.i * s, (self.i + 1) * s, self.j * s, (self.j + 1) * s)

    def children(self):
        k, i, j = self.k + 1, 2 * self.i, 2 * self.j
        return [DyadicSquare(k, i, j), DyadicSquare(k, i + 1, j),
                DyadicSquare(k, i, j + 1), DyadicSquare(k, i + 1, j + 1)]

    def ancestor(self, depth: int) -> "DyadicSquare":
        if depth > self.k:
            raise ValueError("ancestor must be shallower")
        shift = self.k - depth
        return DyadicSquare(depth, self.i >> shift, self.j >> shift)

    def contains_square(self, other: "DyadicSquare") -> bool:
        return other.k >= self.k and other.ancestor(self.k) == self

    def interiors_disjoint(self, other: "DyadicSquare") -> bool:
        lo, hi = (self, other) if self.k <= other.k else (other, self)
        return not lo.contains_square(hi)


def enclosing_square(xmin, xmax, ymin, ymax, max_depth: int = 60) -> Optional[DyadicSquare]:
    """Deepest dyadic square containing the rectangle, or None."""
    best = None
    for k in range(max_depth + 1):
        s = math.ldexp(1.0, -k)
        i = math.floor(xmin / s)
        j = math.floor(ymin / s)
        if (i + 1) * s >= xmax and (j + 1) * s >= ymax:
            best = DyadicSquare(k, i, j)
        else:
            break
    return best


# --------------------------------------------------------------------------
# planar regions
# --------------------------------------------------------------------------


def _square_seed(seed: int, sq: DyadicSquare):
    # zigzag maps signed indices to the nonnegative entropy SeedSequence wants
    zz = lambda v: 2 * v if v >= 0 else -2 * v - 1
    return np.random.SeedSequence([seed, sq.k, zz(sq.i), zz(sq.j)])


def stratified_points(sq: DyadicSquare, samples_per_axis: int, seed: int = 0) -> np.ndarray:
    """One jittered sample per cell of an n x n subgrid of the square."""
    n = samples_per_axis
    rng = np.random.default_rng(_square_seed(seed, sq))
    x0, _, y0, _ = sq.bounds
    h = sq.side / n
    idx = np.arange(n)
    gx, gy = np.meshgrid(idx, idx, indexing="ij")
    jit = rng.random((n, n, 2))
    pts = np.empty((n * n, 2))
    pts[:, 0] = x0 + (gx.ravel() + jit[..., 0].ravel()) * h
    pts[:, 1] = y0 + (gy.ravel() + jit[..., 1].ravel()) * h
    return pts


class PlanarRegion:
    """Membership predicate plus a finite bounding box.

    Subclasses implement ``contains``; ``overlap_fraction`` defaults to
    stratified sampling and may be overridden with exact formulas.
    """

    bbox: tuple

    def contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __contains__(self, p) -> bool:
        return bool(self.contains(np.asarray(p, dtype=float).reshape(1, 2))[0])

    def overlap_fraction(self, sq: DyadicSquare, samples_per_axis: int = 32, seed: int = 0) -> float:
        pts = stratified_points(sq, samples_per_axis, seed)
        return float(np.count_nonzero(self.contains(pts))) / len(pts)

    def overlap_fractions(self, squares: Sequence[DyadicSquare], samples_per_axis: int = 32,
                          seed: int = 0) -> np.ndarray:
        if not squares:
            return np.zeros(0)
        n2 = samples_per_axis**2
        out = np.empty(len(squares))
        chunk = max(1, 2**20 // n2)
        for start in range(0, len(squares), chunk):
            block = squares[start:start + chunk]
            pts = np.concatenate([stratified_points(q, samples_per_axis, seed) for q in block])
            hits = self.contains(pts).reshape(len(block), n2)
            out[start:start + len(block)] = hits.sum(axis=1) / n2
        return out

    def area(self, samples: int = 400_000, seed: int = 0) -> float:
        xmin, xmax, ymin, ymax = self.bbox
        rng = np.random.default_rng(seed)
        pts = rng.random((samples, 2)) * [xmax - xmin, ymax - ymin] + [xmin, ymin]
        return float(self.contains(pts).mean()) * (xmax - xmin) * (ymax - ymin)


class Rectangle(PlanarRegion):
    """Closed axis-aligned rectangle; overlaps are computed exactly."""

    def __init__(self, xmin, xmax, ymin, ymax):
        if not (xmin <= xmax and ymin <= ymax):
            raise ValueError("empty rectangle bounds")
        self.bbox = (float(xmin), float(xmax), float(ymin), float(ymax))

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        x0, x1, y0, y1 = self.bbox
        return (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)

    def _overlap_area(self, sq):
        a0, a1, b0, b1 = sq.bounds
        x0, x1, y0, y1 = self.bbox
        w = max(0.0, min(a1, x1) - max(a0, x0))
        h = max(0.0, min(b1, y1) - max(b0, y0))
        return w * h

    def overlap_fraction(self, sq, samples_per_axis=32, seed=0):
        return self._overlap_area(sq) / (sq.side * sq.side)

    def overlap_fractions(self, squares, samples_per_axis=32, seed=0):
        return np.array([self.overlap_fraction(q) for q in squares])

    def area(self, samples=0, seed=0):
        x0, x1, y0, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)


class Disk(PlanarRegion):
    def __init__(self, center=(0.0, 0.0), radius=1.0):
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        cx, cy = self.center
        self.bbox = (cx - radius, cx + radius, cy - radius, cy + radius)

    def contains(self, pts):
        d = np.asarray(pts, dtype=float) - self.center
        return np.einsum("ij,ij->i", d, d) <= self.radius**2

    def area(self, samples=0, seed=0):
        return math.pi * self.radius**2


class Ellipse(PlanarRegion):
    """Axis-aligned ellipse (x-cx)^2/a^2 + (y-cy)^2/b^2 <= 1."""

    def __init__(self, a, b, center=(0.0, 0.0)):
        self.a, self.b = float(a), float(b)
        self.center = np.asarray(center, dtype=float)
        cx, cy = self.center
        self.bbox = (cx - a, cx + a, cy - b, cy + b)

    def contains(self, pts):
        d = np.asarray(pts, dtype=float) - self.center
        return (d[:, 0] / self.a) ** 2 + (d[:, 1] / self.b) ** 2 <= 1.0

    def area(self, samples=0, seed=0):
        return math.pi * self.a * self.b


class PredicateRegion(PlanarRegion):
    """Wraps a vectorised predicate ``f(pts) -> bool array`` with a box."""

    def __init__(self, predicate: Callable, bbox):
        self.predicate = predicate
        self.bbox = tuple(float(v) for v in bbox)

    def contains(self, pts):
        return np.asarray(self.predicate(np.asarray(pts, dtype=float)), dtype=bool)


# --------------------------------------------------------------------------
# images of disks under planar maps
# --------------------------------------------------------------------------


class PlaneMap:
    """Smooth planar map with an analytic differential.

    ``f`` and ``df`` act on (n, 2) arrays; ``df`` returns (n, 2, 2).
    """

    def __init__(self, f: Callable, df: Callable, name: str = "map"):
        self.f = f
        self.df = df
        self.name = name

    def __call__(self, pts):
        return self.f(np.asarray(pts, dtype=float))

    def jacobian(self, pts):
        return self.df(np.asarray(pts, dtype=float))

    @classmethod
    def linear(cls, M, name: str = "linear") -> "PlaneMap":
        M = np.asarray(M, dtype=float)
        return cls(lambda p: p @ M.T, lambda p: np.broadcast_to(M, (len(p), 2, 2)).copy(), name)

    @classmethod
    def rotation(cls, theta: float) -> "PlaneMap":
        c, s = math.cos(theta), math.sin(theta)
        return cls.linear([[c, -s], [s, c]], name=f"rotation({theta})")


def _disk_samples(r: float, n_rad: int, n_ang: int) -> np.ndarray:
    rad = r * np.sqrt((np.arange(n_rad) + 0.5) / n_rad)
    ang = 2.0 * np.pi * np.arange(n_ang) / n_ang
    R, T = np.meshgrid(rad, ang, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    circle = r * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    return np.concatenate([[[0.0, 0.0]], pts, circle])


class ImageRegion(PlanarRegion):
    """The closed image f(D_r) of a disk, tested by inverting f.

    Each query is seeded at the preimage of its nearest forward sample and
    refined with damped Newton steps. Points where Newton stalls although
    a forward sample is nearby are counted as undecided and treated as
    outside.
    """

    def __init__(self, forward_map: PlaneMap, r: float, inversion_tolerance: float = 1e-10,
                 max_iter: int = 60, n_rad: int = 96, n_ang: int = 384):
        if r <= 0:
            raise ValueError("radius must be positive")
        self.map = forward_map
        self.r = float(r)
        self.tol = float(inversion_tolerance)
        self.max_iter = max_iter
        self.pre = _disk_samples(self.r, n_rad, n_ang)
        jac = forward_map.jacobian(self.pre)
        det = np.linalg.det(jac)
        if not (np.all(det > 0) or np.all(det < 0)):
            raise ValueError("forward map is not injective on the disk (Jacobian changes sign)")
        self.img = forward_map(self.pre)
        self.tree = cKDTree(self.img)
        # typical gap between neighbouring forward samples
        dd, _ = self.tree.query(self.img, k=2)
        self.spacing = float(np.max(dd[:, 1]))
        ring = self.img[-n_ang:]
        gap = float(np.max(np.linalg.norm(np.roll(ring, -1, axis=0) - ring, axis=1)))
        lo = self.img.min(axis=0) - gap
        hi = self.img.max(axis=0) + gap
        self.bbox = (lo[0], hi[0], lo[1], hi[1])
        self.queries = 0
        self.undecided = 0

    @property
    def undecided_fraction(self) -> float:
        return self.undecided / self.queries if self.queries else 0.0

    def invert(self, pts):
        """Return (preimages, converged) for an (n, 2) array of targets."""
        pts = np.asarray(pts, dtype=float)
        _, idx = self.tree.query(pts)
        z = self.pre[idx].copy()
        res = self.map(z) - pts
        err = np.linalg.norm(res, axis=1)
        active = err >= self.tol
        for _ in range(self.max_iter):
            if not active.any():
                break
            za, ra, ea = z[active], res[active], err[active]
            J = self.map.jacobian(za)
            try:
                step = np.linalg.solve(J, ra[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.einsum("nij,nj->ni", np.linalg.pinv(J), ra)
            t = np.ones(len(za))
            best_z, best_r, best_e = za.copy(), ra.copy(), ea.copy()
            pending = np.ones(len(za), dtype=bool)
            for _ in range(12):
                cand = za - t[:, None] * step
                cr = self.map(cand) - pts[active]
                ce = np.linalg.norm(cr, axis=1)
                ok = pending & (ce < ea)
                best_z[ok], best_r[ok], best_e[ok] = cand[ok], cr[ok], ce[ok]
                pending &= ~ok
                if not pending.any():
                    break
                t[pending] *= 0.5
            z[active], res[active], err[active] = best_z, best_r, best_e
            stuck = pending.copy()
            a_idx = np.flatnonzero(active)
            active[a_idx[stuck]] = False
            active &= err >= self.tol
        return z, err < self.tol

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        z, conv = self.invert(pts)
        inside = conv & (np.einsum("ij,ij->i", z, z) <= self.r**2 * (1.0 + 1e-12))
        dist, _ = self.tree.query(pts)
        undecided = ~conv & (dist <= 2.0 * self.spacing)
        self.queries += len(pts)
        self.undecided += int(np.count_nonzero(undecided))
        return inside


def image_region(forward_map: PlaneMap, r: float, inversion_tolerance: float = 1e-10) -> ImageRegion:
    return ImageRegion(forward_map, r, inversion_tolerance)


# --------------------------------------------------------------------------
# covers
# --------------------------------------------------------------------------


@dataclass
class Cover:
    squares: list = field(default_factory=list)
    residual_squares: int = 0
    residual_area: float = 0.0
    max_depth: int = 0
    trivial: bool = False

    def by_depth(self) -> dict:
        out: dict = {}
        for q in self.squares:
            out.setdefault(q.k, []).append(q)
        return dict(sorted(out.items()))

    def counts(self, d: Optional[float] = None) -> list:
        """Raw counts per depth, or (sqrt 2)^d times them when d is given."""
        n = [0] * (max((q.k for q in self.squares), default=-1) + 1)
        for q in self.squares:
            n[q.k] += 1
        if d is None:
            return n
        w = SQRT2**d
        return [w * c for c in n]

    def __len__(self):
        return len(self.squares)


def _probe_outside(region: PlanarRegion, n: int = 257) -> bool:
    """True when the region pokes out of its own bounding box."""
    xmin, xmax, ymin, ymax = region.bbox
    ex = 1e-9 * max(1.0, xmax - xmin)
    ey = 1e-9 * max(1.0, ymax - ymin)
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    ring = np.concatenate([
        np.stack([xs, np.full(n, ymin - ey)], 1),
        np.stack([xs, np.full(n, ymax + ey)], 1),
        np.stack([np.full(n, xmin - ex), ys], 1),
        np.stack([np.full(n, xmax + ex), ys], 1),
    ])
    return bool(region.contains(ring).any())


def build_cover(region: PlanarRegion, max_depth: int, fill_fraction=Fraction(1, 5),
                samples_per_axis: int = 32, seed: int = 0, fast_path: bool = True,
                undecided_limit: float = 1e-3) -> Cover:
    """Breadth-first dyadic cover of ``region``.

    A region that sits inside a single dyadic square of depth >= 1 is
    covered by that square alone. Otherwise depth-0 squares meeting the
    bounding box are tested first and rejected squares with positive
    overlap are refined. Squares still unresolved at ``max_depth`` are the
    residual.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be nonnegative")
    fill = float(fill_fraction)
    if not (0.0 < fill < 1.0):
        raise ValueError("fill_fraction must lie in (0, 1)")
    xmin, xmax, ymin, ymax = region.bbox
    if not all(math.isfinite(v) for v in region.bbox):
        raise ValueError("bounding box must be finite")
    if _probe_outside(region):
        raise ValueError("region extends beyond its bounding box")

    cover = Cover(max_depth=max_depth)
    if fast_path:
        enc = enclosing_square(xmin, xmax, ymin, ymax)
        if enc is not None and enc.k >= 1:
            if region.overlap_fraction(enc, samples_per_axis, seed) > 0.0:
                cover.squares.append(enc)
                cover.trivial = True
            return cover

    level = [DyadicSquare(0, i, j)
             for i in range(math.floor(xmin), math.floor(xmax) + 1)
             for j in range(math.floor(ymin), math.floor(ymax) + 1)]
    level = [q for q in level if _meets_box(q, region.bbox)]
    for k in range(max_depth + 1):
        if not level:
            break
        frac = region.overlap_fractions(level, samples_per_axis, seed)
        nxt = []
        for q, f in zip(level, frac):
            if f >= fill - 1e-12:
                cover.squares.append(q)
            elif f > 0.0:
                if k < max_depth:
                    nxt.extend(c for c in q.children() if _meets_box(c, region.bbox))
                else:
                    cover.residual_squares += 1
                    cover.residual_area += f * q.side**2
        level = nxt
    if isinstance(region, ImageRegion) and region.undecided_fraction > undecided_limit:
        raise RuntimeError(
            f"undecided membership fraction {region.undecided_fraction:.3g} exceeds {undecided_limit}")
    return cover


def _meets_box(q: DyadicSquare, bbox) -> bool:
    a0, a1, b0, b1 = q.bounds
    xmin, xmax, ymin, ymax = bbox
    return a0 <= xmax and a1 >= xmin and b0 <= ymax and b1 >= ymin


def cover_sum(cover: Cover, d: float) -> float:
    """Sum of diam(Q)^d = (sqrt 2 * 2^-k)^d over the cover."""
    if not (1.0 <= d <= 2.0):
        raise ValueError("d must lie in [1, 2]")
    return math.fsum(q.diameter**d for q in cover.squares)


def interpolation_check(counts: Sequence[float], d: float) -> bool:
    """Hoelder interpolation between the 2^-k and 4^-k weighted sums."""
    if not (1.0 <= d <= 2.0):
        raise ValueError("d must lie in [1, 2]")
    n = np.asarray(counts, dtype=float)
    if np.any(n < 0):
        raise ValueError("counts must be nonnegative")
    k = np.arange(len(n))
    lhs = math.fsum(n * 2.0 ** (-k * d))
    s1 = math.fsum(n * 2.0 ** (-k))
    s2 = math.fsum(n * 4.0 ** (-k))
    rhs = s1 ** (2.0 - d) * s2 ** (d - 1.0)
    return lhs <= rhs * (1.0 + 1e-12)


@dataclass(frozen=True)
class GeometryBounds:
    """Derivative bound K, Jacobian bound L and disk radius r."""

    K: float
    L: float
    r: float

    def __post_init__(self):
        if self.K < 1.0 or self.L < 1.0 or self.r <= 0.0:
            raise ValueError("need K >= 1, L >= 1 and r > 0")

    @property
    def scaled(self) -> bool:
        return self.K >= self.L


def measure_bound(g: GeometryBounds, d: float) -> float:
    """170 pi r^d K^(2-d) L^(d-1), using max(K, L) when L exceeds K."""
    if not (1.0 <= d <= 2.0):
        raise ValueError("d must lie in [1, 2]")
    K = max(g.K, g.L)
    return C_UNIVERSAL * g.r**d * K ** (2.0 - d) * g.L ** (d - 1.0)


def cover_scale(g: GeometryBounds) -> float:
    """Diameter scale L r sqrt(2) / K of the cover behind the bound."""
    return g.L * g.r * SQRT2 / max(g.K, g.L)


# --------------------------------------------------------------------------
# boundary length
# --------------------------------------------------------------------------


def _edge_crossing(region, a, b, inside_a, iters=30):
    lo, hi = a.copy(), b.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        m_in = region.contains(mid)
        same = m_in == inside_a
        lo[same] = mid[same]
        hi[~same] = mid[~same]
    return 0.5 * (lo + hi)


def boundary_length(region: PlanarRegion, sq: DyadicSquare, n: int = 32) -> float:
    """Length of the region boundary inside the open square.

    Marching squares on an (n+1)^2 grid of corner samples; crossing points
    on cell edges are located by bisection.
    """
    x0, x1, y0, y1 = sq.bounds
    # inset the grid a hair so boundaries on the square's own edges drop out
    e = 1e-9 * sq.side
    xs = np.linspace(x0 + e, x1 - e, n + 1)
    ys = np.linspace(y0 + e, y1 - e, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = region.contains(np.stack([X.ravel(), Y.ravel()], 1)).reshape(n + 1, n + 1)
    P = np.stack([X, Y], axis=-1)

    # crossing points on horizontal edges (i,j)-(i+1,j) and vertical (i,j)-(i,j+1)
    def crossings(a_idx, b_idx):
        ia, ja = a_idx
        ib, jb = b_idx
        A, B = P[ia, ja], P[ib, jb]
        inA, inB = inside[ia, ja], inside[ib, jb]
        mask = inA != inB
        pts = np.full(A.shape, np.nan)
        if mask.any():
            pts[mask] = _edge_crossing(region, A[mask], B[mask], inA[mask])
        return pts

    ii, jj = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="ij")
    hx = crossings((ii, jj), (ii + 1, jj))  # shape (n, n+1, 2)
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n), indexing="ij")
    vx = crossings((ii, jj), (ii, jj + 1))  # shape (n+1, n, 2)

    total = 0.0
    for i in range(n):
        for j in range(n):
            pts = [p for p in (hx[i, j], vx[i + 1, j], hx[i, j + 1], vx[i, j]) if not np.isnan(p[0])]
            if len(pts) == 2:
                total += float(np.hypot(*(pts[0] - pts[1])))
            elif len(pts) == 4:
                # saddle cell: pair adjacent crossings, the shorter way round
                a = np.hypot(*(pts[0] - pts[1])) + np.hypot(*(pts[2] - pts[3]))
                b = np.hypot(*(pts[1] - pts[2])) + np.hypot(*(pts[3] - pts[0]))
                total += float(min(a, b))
    return total


@dataclass
class BoundaryReport:
    checked: int
    violations: list
    lengths: dict

    @property
    def ok(self) -> bool:
        return not self.violations


def boundary_length_check(region: PlanarRegion, cover, c_prime=Fraction(1, 20), n: int = 32) -> BoundaryReport:
    """Check length(boundary in Q) >= c' 2^-k for cover squares with k > 0.

    Squares the boundary does not cross are not boundary squares and are
    skipped, as are depth-0 squares.
    """
    squares = cover.squares if isinstance(cover, Cover) else list(cover)
    c = float(c_prime)
    violations, lengths = [], {}
    checked = 0
    for q in squares:
        if q.k == 0:
            continue
        length = boundary_length(region, q, n)
        if length == 0.0:
            continue
        checked += 1
        lengths[q] = length
        if length < c * q.side:
            violations.append((q, length))
    return BoundaryReport(checked, violations, lengths)
