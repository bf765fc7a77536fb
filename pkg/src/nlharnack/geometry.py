"""Lattice sets, covers, ball chains and the constructive covering constants.

Sets are node masks on a :class:`~nlharnack.grid.DomainGrid`.  Continuum
inclusions hold at node resolution with one cell of slack: distances are
between node centres, and the distance of a node to the boundary of a set is
the distance to the nearest node outside it minus h/2.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NoChainError, PreconditionError, ResolutionError
from .grid import DIST_RTOL, DomainGrid, ScenarioFields, within

PROVENANCE = ("user", "level_set", "dilation", "erosion", "intersection", "union")


@dataclass(frozen=True, eq=False)
class CompactSet:
    """A grid-adapted compact subset of the closure of Omega."""

    grid: DomainGrid
    mask: np.ndarray
    provenance: str = "user"

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).copy()
        if m.shape != (self.grid.n,):
            raise ValueError("mask must have one entry per node")
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def full(cls, grid: DomainGrid) -> "CompactSet":
        return cls(grid, np.ones(grid.n, dtype=bool))

    @classmethod
    def from_nodes(cls, grid: DomainGrid, nodes) -> "CompactSet":
        m = np.zeros(grid.n, dtype=bool)
        m[np.asarray(nodes, dtype=np.int64)] = True
        return cls(grid, m)

    @classmethod
    def from_boxes(cls, grid: DomainGrid, boxes) -> "CompactSet":
        """Nodes whose centre lies in the closed union of ``boxes``.

        A 1-D box may be given as ``[lo, hi]``.
        """
        pts = grid.points
        tol = 1e-9 * grid.h
        m = np.zeros(grid.n, dtype=bool)
        for box in boxes:
            if grid.d == 1 and np.ndim(box) == 1:
                box = [box]
            ok = np.ones(grid.n, dtype=bool)
            for k, (lo, hi) in enumerate(box):
                ok &= (pts[:, k] >= lo - tol) & (pts[:, k] <= hi + tol)
            m |= ok
        return cls(grid, m)

    @classmethod
    def from_spec(cls, spec, fields: ScenarioFields) -> "CompactSet":
        """``"all"``, ``"levelset:g>eta"`` / ``"levelset:g<eta"`` or a list of boxes."""
        grid = fields.grid
        if isinstance(spec, str):
            s = spec.replace(" ", "")
            if s == "all":
                return cls.full(grid)
            if s.startswith("levelset:g"):
                rest = s[len("levelset:g"):]
                if rest.startswith(">="):
                    return level_set(fields, float(rest[2:]), "above")
                if rest.startswith(">"):
                    return level_set(fields, float(rest[1:]), "above")
                if rest.startswith("<"):
                    return level_set(fields, float(rest[1:]), "below")
            raise ValueError(f"unrecognised set spec {spec!r}")
        return cls.from_boxes(grid, spec)

    @property
    def cells(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def empty(self) -> bool:
        return not self.mask.any()

    def __len__(self) -> int:
        return self.size

    def __contains__(self, node) -> bool:
        return bool(self.mask[int(node)])

    def issubset(self, other: "CompactSet") -> bool:
        return not np.any(self.mask & ~other.mask)

    def __and__(self, other: "CompactSet") -> "CompactSet":
        return CompactSet(self.grid, self.mask & other.mask, "intersection")

    def __or__(self, other: "CompactSet") -> "CompactSet":
        return CompactSet(self.grid, self.mask | other.mask, "union")

    def boundary_distance(self) -> np.ndarray:
        """Per node: d(x, boundary of this set) (negative outside)."""
        return self.grid.boundary_distance(self.mask)

    def describe(self) -> str:
        if self.empty:
            return f"{self.provenance}:empty"
        pts = self.grid.points[self.mask]
        lo = pts.min(axis=0) - 0.5 * self.grid.h
        hi = pts.max(axis=0) + 0.5 * self.grid.h
        box = "x".join(f"[{a:.6g},{b:.6g}]" for a, b in zip(lo, hi))
        return f"{self.provenance}:{self.size} nodes in {box}"


def _pairwise_dist(grid: DomainGrid, pts, p) -> np.ndarray:
    diff = pts - p
    if grid.periodic:
        L = grid.bounds[0][1] - grid.bounds[0][0]
        diff = diff - L * np.round(diff / L)
    return np.linalg.norm(diff, axis=1)


# -- morphology ----------------------------------------------------------------

def level_set(fields: ScenarioFields, eta: float, side: str = "above") -> CompactSet:
    """W_eta = {g >= eta} (``above``) or Z_eta = {g < eta} (``below``)."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    if side == "above":
        m = fields.g >= eta
    elif side == "below":
        m = fields.g < eta
    else:
        raise ValueError("side must be 'above' or 'below'")
    return CompactSet(fields.grid, m, "level_set")


def dilate(s: CompactSet, r: float) -> CompactSet:
    """Nodes within distance r of the set."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0 or s.empty:
        return CompactSet(s.grid, s.mask, "dilation")
    grid = s.grid
    if grid.periodic:
        hits = grid.tree.query_ball_point(grid._query_points(grid.points[s.mask]),
                                          r * (1 + DIST_RTOL) + 1e-14)
        m = np.zeros(grid.n, dtype=bool)
        for ix in hits:
            m[ix] = True
        return CompactSet(grid, m | s.mask, "dilation")
    dist = grid.distance_to_set(s.mask)
    return CompactSet(grid, within(dist, r), "dilation")


def erode(s: CompactSet, nu: float) -> CompactSet:
    """Nodes of the set whose distance to its complement is at least nu."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if nu == 0:
        return CompactSet(s.grid, s.mask, "erosion")
    bd = s.grid.boundary_distance(s.mask)
    keep = s.mask & (bd >= nu * (1 - DIST_RTOL) - 1e-14)
    return CompactSet(s.grid, keep, "erosion")


# -- covers and chains -----------------------------------------------------------

@dataclass(frozen=True)
class CoverReport:
    centers: tuple
    radius: float
    N: int

    def rows(self, grid: DomainGrid):
        for k, c in enumerate(self.centers):
            yield (k, c, *grid.points[c], self.radius)


def ball_cover(s: CompactSet, radius: float) -> CoverReport:
    """Farthest-point greedy cover, started at the lowest node index.

    Every node of the set ends within ``radius`` of a centre; the number of
    centres is at most the packing number of the set at ``radius``.
    """
    grid = s.grid
    if radius <= 0.5 * grid.h:
        raise ResolutionError(f"cover radius {radius} is not resolved by h = {grid.h} (need > h/2)")
    cells = s.cells
    if cells.size == 0:
        return CoverReport((), radius, 0)
    pts = grid.points[cells]
    centers = [int(cells[0])]
    dmin = _pairwise_dist(grid, pts, pts[0])
    while True:
        k = int(np.argmax(dmin))
        if within(dmin[k], radius):
            break
        centers.append(int(cells[k]))
        dmin = np.minimum(dmin, _pairwise_dist(grid, pts, pts[k]))
    return CoverReport(tuple(centers), radius, len(centers))


def cover_holds(s: CompactSet, cover: CoverReport) -> bool:
    """Exact node-by-node check of the cover invariant."""
    if s.empty:
        return True
    grid = s.grid
    pts = grid.points[s.cells]
    dmin = np.full(len(pts), np.inf)
    for c in cover.centers:
        dmin = np.minimum(dmin, _pairwise_dist(grid, pts, grid.points[c]))
    return bool(np.all(within(dmin, cover.radius)))


@dataclass(frozen=True)
class BallChain:
    centers: tuple
    eta: float
    N0: int
    N_cover: int

    def rows(self, grid: DomainGrid):
        for k, c in enumerate(self.centers):
            yield (k, c, *grid.points[c])


def chain_of_balls(x: int, y: int, ambient: CompactSet, eta: float) -> BallChain:
    """Shortest chain x = t_0, ..., t_N0 = y through eta/4-cover centres of
    ``ambient`` with consecutive centres at distance <= eta/2."""
    x, y = int(x), int(y)
    if x not in ambient or y not in ambient:
        raise PreconditionError("chain endpoints must lie in the ambient set")
    cover = ball_cover(ambient, eta / 4)
    if x == y:
        return BallChain((x,), eta, 0, cover.N)
    grid = ambient.grid
    nodes = [x, *[c for c in cover.centers if c not in (x, y)], y]
    pts = grid.points[nodes]
    m = len(nodes)
    adj = [np.flatnonzero(within(_pairwise_dist(grid, pts, pts[k]), eta / 2)) for k in range(m)]
    prev = np.full(m, -1)
    seen = np.zeros(m, dtype=bool)
    seen[0] = True
    q = deque([0])
    while q:
        k = q.popleft()
        for j in adj[k]:
            if not seen[j]:
                seen[j] = True
                prev[j] = k
                q.append(j)
    if not seen[m - 1]:
        comp_x = tuple(nodes[k] for k in np.flatnonzero(seen))
        seen_y = np.zeros(m, dtype=bool)
        seen_y[m - 1] = True
        q = deque([m - 1])
        while q:
            k = q.popleft()
            for j in adj[k]:
                if not seen_y[j]:
                    seen_y[j] = True
                    q.append(j)
        comp_y = tuple(nodes[k] for k in np.flatnonzero(seen_y))
        raise NoChainError(
            f"nodes {x} and {y} lie in different components of the ambient set at scale eta/2 = {eta / 2}",
            components=(comp_x, comp_y))
    path = [m - 1]
    while path[-1] != 0:
        path.append(int(prev[path[-1]]))
    chain = tuple(nodes[k] for k in reversed(path))
    return BallChain(chain, eta, len(chain) - 1, cover.N)


def chain_holds(chain: BallChain, grid: DomainGrid) -> bool:
    pts = grid.points[list(chain.centers)]
    if len(pts) < 2:
        return True
    steps = [_pairwise_dist(grid, pts[k + 1:k + 2], pts[k])[0] for k in range(len(pts) - 1)]
    return bool(np.all(within(np.array(steps), chain.eta / 2)))


# -- constructive constants -------------------------------------------------------

# reference annulus of the contraction lemma: r' = 15/16, r = 1, eps = 1/8,
# covering balls of radius r - r' + eps = 3/16 centred on the inner circle
_R_IN = 15.0 / 16.0
_R_OUT = 1.0
_COVER_RADIUS = 3.0 / 16.0
# radius of the ball in the measure term, as stated in the constant's bound
_CAP_RADIUS = 17.0 / 16.0
MC_SAMPLES = 1_000_000
MAX_LATTICE_CELLS = 1_000_000


def annulus_cover_count(d: int) -> int:
    """N1: balls B(z, 3/16), z on the circle of radius 15/16, covering A(0, 15/16, 1)."""
    if d == 1:
        return 2
    if d == 2:
        # the worst point sits on the outer circle midway between two centres
        cmin = (_R_IN ** 2 + _R_OUT ** 2 - _COVER_RADIUS ** 2) / (2 * _R_IN * _R_OUT)
        k = 3
        while math.cos(math.pi / k) < cmin:
            k += 1
        return k
    raise ValueError("d must be 1 or 2")


def _cap_indicator(pts, cap_radius):
    z = np.zeros(pts.shape[1])
    z[0] = _R_IN
    r = np.linalg.norm(pts, axis=1)
    return (r >= _R_IN) & (r <= _R_OUT) & (np.linalg.norm(pts - z, axis=1) <= cap_radius)


@lru_cache(maxsize=None)
def reference_measure(d: int, cells_per_axis: int | None = None, cap_radius: float = _CAP_RADIUS) -> float:
    """mu(A(0, 15/16, 1) cap B(z, cap_radius)), |z| = 15/16, cap radius 17/16 by default.

    Midpoint lattice quadrature on [-1, 1]^d; if the requested lattice would
    exceed 10^6 cells, a fixed-seed Monte-Carlo estimate with 10^6 samples.
    """
    if cells_per_axis is None:
        cells_per_axis = int(round(MAX_LATTICE_CELLS ** (1.0 / d)))
    if cells_per_axis ** d > MAX_LATTICE_CELLS:
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1.0, 1.0, size=(MC_SAMPLES, d))
        return float(_cap_indicator(pts, cap_radius).mean() * 2.0 ** d)
    hh = 2.0 / cells_per_axis
    ax = -1.0 + (np.arange(cells_per_axis) + 0.5) * hh
    if d == 1:
        return float(_cap_indicator(ax[:, None], cap_radius).sum() * hh)
    total = 0
    for xv in ax:
        row = np.column_stack([np.full(cells_per_axis, xv), ax])
        total += int(_cap_indicator(row, cap_radius).sum())
    return float(total * hh * hh)


def log_contraction_constant(C0: float, eta: float, d: int) -> float:
    if not (C0 > 0 and eta > 0):
        raise ValueError("C0 and eta must be positive")
    if math.isinf(C0):
        return math.log(0.5)
    # each cover piece A(x, r', r) cap B(z_i, 3r/16) has measure r^d mu with r >= eta/4;
    # the mean value step multiplies by this measure
    mu = reference_measure(d, cap_radius=_COVER_RADIUS)
    lc = math.log(C0) + d * math.log(eta / 4) + math.log(mu) - math.log(2.0) \
        - math.log(annulus_cover_count(d))
    return min(lc, math.log(0.5))


def contraction_constant(C0: float, eta: float, d: int) -> float:
    """C1 = min{C0 (eta/4)^d mu / (2 N1), 1/2}, independent of the radius r.

    mu is the measure of A(0, 15/16, 1) cap B(z, 3/16), |z| = 15/16.
    """
    return math.exp(log_contraction_constant(C0, eta, d))


class ChainConstants:
    """(C_pair, C_sum, N) with the logarithms kept for tiny values."""

    def __init__(self, log_C2: float, N: int):
        self.log_C2 = log_C2
        self.N = int(N)
        self.log_C_pair = (self.N + 2) * log_C2
        self.log_C_sum = self.log_C_pair - math.log(max(self.N, 1))

    @property
    def C_pair(self) -> float:
        return math.exp(self.log_C_pair)

    @property
    def C_sum(self) -> float:
        return math.exp(self.log_C_sum)

    def __iter__(self):
        return iter((self.C_pair, self.C_sum, self.N))

    def __repr__(self):
        return (f"ChainConstants(C_pair=exp({self.log_C_pair:.6g}), "
                f"C_sum=exp({self.log_C_sum:.6g}), N={self.N})")


def chain_constant(C0: float, eta: float, sigma: CompactSet, require_interior: bool = True) -> ChainConstants:
    """C2 = C1(eta/4) C1(eta/2), C_pair = C2^(N+2), C_sum = C_pair / N with
    N the eta/4 greedy cover count of sigma."""
    grid = sigma.grid
    if sigma.empty:
        raise PreconditionError("sigma is empty")
    if require_interior and not grid.periodic:
        bd = grid.boundary_distance()[sigma.mask]
        if bd.min() < 4 * eta * (1 - DIST_RTOL):
            raise PreconditionError(
                f"the 4*eta = {4 * eta:.6g} dilation of sigma leaves Omega "
                f"(min boundary distance {bd.min():.6g})")
    lc1 = log_contraction_constant(C0, eta, grid.d)
    N = ball_cover(sigma, eta / 4).N
    return ChainConstants(2.0 * lc1, N)


# -- inner cone -------------------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    theta: float
    height: float

    def __post_init__(self):
        if not (0 < self.theta < math.pi / 2):
            raise ValueError("cone half-angle must lie in (0, pi/2)")
        if not self.height > 0:
            raise ValueError("cone height must be positive")


@dataclass(frozen=True)
class ConeReport:
    passed: bool
    checked: int
    witnesses: dict
    failing_node: int | None = None


def cone_directions(d: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    ang = np.arange(8) * math.pi / 4
    # round so the axis directions are exact
    return np.round(np.column_stack([np.cos(ang), np.sin(ang)]), 15) + 0.0


def _cone_samples(d, direction, cone, h):
    nr = int(math.ceil(cone.height / (0.25 * h))) + 1
    rs = np.linspace(0.0, cone.height, nr)
    if d == 1:
        return rs[:, None] * direction
    na = int(math.ceil(2 * cone.theta * cone.height / (0.25 * h))) + 1
    phis = np.linspace(-cone.theta, cone.theta, max(na, 3))
    base = math.atan2(direction[1], direction[0])
    R, P = np.meshgrid(rs, base + phis, indexing="ij")
    return np.column_stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()])


def inner_cone_check(s: CompactSet, cone: ConeSpec) -> ConeReport:
    """For each boundary-adjacent node, find one of the axis/diagonal cones
    C(x, theta, a) lying inside the set.

    A cone lies inside when every sample point falls in a lattice cell of the
    set; points on a cell face count for the cell on the lower side.
    """
    grid = s.grid
    if s.empty:
        raise PreconditionError("inner_cone_check needs a nonempty set")
    lat = np.zeros(grid.shape, dtype=bool)
    lat[tuple(grid.node_lattice[s.mask].T)] = True
    pad = np.pad(lat, 1, constant_values=False)
    # boundary-adjacent: some 8-neighbour (or 2-neighbour in 1-D) is outside
    adj = np.zeros_like(lat)
    for off in np.ndindex(*([3] * grid.d)):
        sl = tuple(slice(o, o + n) for o, n in zip(off, grid.shape))
        adj |= ~pad[sl]
    adj &= lat
    lo = np.array([b[0] for b in grid.bounds])
    shape = np.array(grid.shape)
    dirs = cone_directions(grid.d)
    samples = [_cone_samples(grid.d, v, cone, grid.h) for v in dirs]
    witnesses = {}
    checked = 0
    for node in s.cells:
        idx = grid.node_lattice[node]
        if not adj[tuple(idx)]:
            continue
        checked += 1
        x = grid.points[node]
        found = None
        for k, smp in enumerate(samples):
            q = (x + smp - lo) / grid.h
            cell = np.ceil(q - 1.0 - 1e-9).astype(np.int64)
            if np.any(cell < 0) or np.any(cell >= shape):
                continue
            if lat[tuple(cell.T)].all():
                found = k
                break
        if found is None:
            return ConeReport(False, checked, witnesses, int(node))
        witnesses[int(node)] = tuple(float(c) for c in dirs[found])
    return ConeReport(True, checked, witnesses)
