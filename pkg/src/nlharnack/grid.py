"""Uniform cell-centred lattices over unions of boxes, and the sampled fields."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

# slack used in every "distance <= r" test on the lattice
DIST_RTOL = 1e-9


def within(dist, r):
    return dist <= r * (1.0 + DIST_RTOL) + 1e-14


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Cell centres of a uniform lattice covering ``bounds``.

    Omega is the union of ``boxes`` (defaults to the bounding box); a node
    belongs to Omega iff its cell centre does.  Nodes are numbered in raster
    order with axis 0 fastest, skipping exterior lattice cells.
    """

    bounds: tuple
    h: float
    boxes: tuple | None = None
    periodic: bool = False

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", b)
        if self.d not in (1, 2):
            raise ValueError("only d = 1 or d = 2 is supported")
        if self.h <= 0:
            raise ValueError("h must be positive")
        for lo, hi in b:
            if not hi > lo:
                raise ValueError(f"empty axis interval [{lo}, {hi}]")
            n = (hi - lo) / self.h
            if abs(n - round(n)) > 1e-6 * max(1.0, n):
                raise ValueError(f"axis length {hi - lo} is not a multiple of h = {self.h}")
        boxes = self.boxes if self.boxes is not None else (b,)
        boxes = tuple(tuple((float(lo), float(hi)) for lo, hi in box) for box in boxes)
        for box in boxes:
            if len(box) != self.d:
                raise ValueError("box dimension does not match bounds")
        object.__setattr__(self, "boxes", boxes)
        if self.periodic and (self.d != 1 or len(boxes) != 1):
            raise ValueError("periodic grids are 1-D single intervals")
        if self.n == 0:
            raise ValueError("grid has no interior nodes")

    @classmethod
    def box(cls, bounds, h, periodic=False):
        if isinstance(bounds[0], (int, float)):
            bounds = (tuple(bounds),)
        return cls(tuple(tuple(b) for b in bounds), h, periodic=periodic)

    @property
    def d(self) -> int:
        return len(self.bounds)

    @property
    def weight(self) -> float:
        return self.h ** self.d

    @cached_property
    def shape(self) -> tuple:
        return tuple(int(round((hi - lo) / self.h)) for lo, hi in self.bounds)

    @cached_property
    def _axes(self):
        return [lo + (np.arange(n) + 0.5) * self.h for (lo, _), n in zip(self.bounds, self.shape)]

    @cached_property
    def _lattice_xy(self) -> np.ndarray:
        # (n_lattice, d), raster order axis 0 fastest
        mesh = np.meshgrid(*self._axes, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)

    @cached_property
    def lattice_mask(self) -> np.ndarray:
        """Flag per lattice cell (array of ``shape``): centre lies in Omega."""
        xy = self._lattice_xy
        inside = np.zeros(len(xy), dtype=bool)
        for box in self.boxes:
            ok = np.ones(len(xy), dtype=bool)
            for k, (lo, hi) in enumerate(box):
                ok &= (xy[:, k] >= lo) & (xy[:, k] <= hi)
            inside |= ok
        return inside.reshape(self.shape, order="F")

    @cached_property
    def node_lattice(self) -> np.ndarray:
        """Integer lattice multi-index of every node, shape (n, d)."""
        idx = np.argwhere(self.lattice_mask)
        # argwhere is C-ordered; re-sort to raster order with axis 0 fastest
        order = np.lexsort(idx.T)
        return idx[order]

    @cached_property
    def lattice_to_node(self) -> np.ndarray:
        m = np.full(self.shape, -1, dtype=np.int64)
        m[tuple(self.node_lattice.T)] = np.arange(len(self.node_lattice))
        return m

    @cached_property
    def points(self) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        return lo + (self.node_lattice + 0.5) * self.h

    @property
    def n(self) -> int:
        return int(self.lattice_mask.sum())

    @cached_property
    def tree(self) -> cKDTree:
        if self.periodic:
            lo, hi = self.bounds[0]
            return cKDTree(self.points - lo, boxsize=hi - lo)
        return cKDTree(self.points)

    def _query_points(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.periodic:
            lo, hi = self.bounds[0]
            return np.mod(x - lo, hi - lo)
        return x

    def nearest_node(self, x) -> int:
        _, i = self.tree.query(self._query_points(x)[0])
        return int(i)

    def ball(self, i: int, r: float) -> np.ndarray:
        """Sorted node indices within distance r of node i."""
        idx = self.tree.query_ball_point(self._query_points(self.points[i])[0],
                                         r * (1 + DIST_RTOL) + 1e-14)
        return np.sort(np.asarray(idx, dtype=np.int64))

    def ball_sums(self, u, centers, r) -> np.ndarray:
        """Quadrature of u over B(x_c, r) intersected with Omega, for each centre."""
        u = np.asarray(u, dtype=float)
        centers = np.asarray(centers, dtype=np.int64)
        pts = self._query_points(self.points[centers])
        lists = self.tree.query_ball_point(pts, r * (1 + DIST_RTOL) + 1e-14)
        return np.array([math.fsum(u[np.sort(ix)]) for ix in lists]) * self.weight

    def integral(self, u, mask=None) -> float:
        u = np.asarray(u, dtype=float)
        if mask is not None:
            u = u[mask]
        return math.fsum(u) * self.weight

    # -- lattice distance maps -------------------------

    def _padded(self, node_mask):
        lat = np.zeros(self.shape, dtype=bool)
        lat[tuple(self.node_lattice.T)] = node_mask
        return np.pad(lat, 1, constant_values=False)

    def distance_to_complement(self, node_mask) -> np.ndarray:
        """Per node: Euclidean distance from its centre to the nearest lattice
        centre outside ``node_mask`` (exterior cells and a ghost ring count as
        outside).  Infinite-free: the ghost ring bounds it."""
        if self.periodic:
            return self._periodic_distance(~np.asarray(node_mask, dtype=bool))
        pad = self._padded(np.asarray(node_mask, dtype=bool))
        dist = ndimage.distance_transform_edt(pad, sampling=self.h)
        return dist[tuple((self.node_lattice + 1).T)]

    def distance_to_set(self, node_mask) -> np.ndarray:
        """Per node: distance to the nearest node of ``node_mask`` (inf if empty)."""
        node_mask = np.asarray(node_mask, dtype=bool)
        if not node_mask.any():
            return np.full(self.n, np.inf)
        if self.periodic:
            return self._periodic_distance(node_mask)
        lat = np.ones(self.shape, dtype=bool)
        lat[tuple(self.node_lattice[node_mask].T)] = False
        dist = ndimage.distance_transform_edt(lat, sampling=self.h)
        return dist[tuple(self.node_lattice.T)]

    def _periodic_distance(self, node_mask):
        # the periodic cell has no boundary: an empty target is infinitely far
        if not node_mask.any():
            return np.full(self.n, np.inf)
        lo, hi = self.bounds[0]
        t = cKDTree(self.points[node_mask] - lo, boxsize=hi - lo)
        dist, _ = t.query(self.points - lo)
        return dist

    def boundary_distance(self, node_mask=None) -> np.ndarray:
        """d(x, boundary of the set) = distance to complement centre - h/2."""
        if node_mask is None:
            node_mask = np.ones(self.n, dtype=bool)
        return self.distance_to_complement(node_mask) - 0.5 * self.h

    def contains(self, other: "DomainGrid") -> bool:
        """True if every node of ``other`` is a node of self (aligned lattices)."""
        if other.d != self.d or not math.isclose(other.h, self.h, rel_tol=1e-12):
            return False
        _, idx = self.tree.query(other.points)
        return bool(np.allclose(self.points[idx], other.points, atol=1e-9 * self.h, rtol=0))

    def embed_index(self, other: "DomainGrid") -> np.ndarray:
        """Indices in self of the nodes of ``other`` (which must be contained)."""
        _, idx = self.tree.query(other.points)
        return np.asarray(idx, dtype=np.int64)


# -- scalar fields -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScenarioFields:
    grid: DomainGrid
    g: np.ndarray
    b: np.ndarray
    beta: float
    p_exponent: float = 2.0
    vanish_threshold: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float).copy()
        b = np.asarray(self.b, dtype=float).copy()
        if g.shape != (self.grid.n,) or b.shape != (self.grid.n,):
            raise ValueError(f"fields must have one value per node ({self.grid.n})")
        g.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "b", b)
        if self.p_exponent <= 1:
            raise ValueError("p_exponent must exceed 1")

    @cached_property
    def singular(self) -> np.ndarray:
        """Node mask of the vanishing set S = {g <= vanish_threshold}."""
        m = self.g <= self.vanish_threshold
        m.setflags(write=False)
        return m

    def with_b(self, b) -> "ScenarioFields":
        return replace(self, b=np.asarray(b, dtype=float))


# built-in field expressions, referenced as "expr:name(arg, ...)"

def _affine(x, c, *slopes):
    out = np.full(len(x), float(c))
    for k, s in enumerate(slopes):
        out += s * x[:, k]
    return out


def _vee(x, center, slope=1.0):
    return slope * np.abs(x[:, 0] - center)


def _power_well(x, center, scale, gamma, *rest):
    c = np.array([center, *rest[: x.shape[1] - 1]])
    if len(c) < x.shape[1]:
        c = np.full(x.shape[1], float(center))
    return scale * np.linalg.norm(x - c, axis=1) ** gamma


def _cosine(x, c, amp, freq=1.0):
    return c + amp * np.cos(freq * x[:, 0])


def _sine_sum(x, c, amp, freq=1.0):
    return c + amp * np.sin(freq * x).sum(axis=1) / x.shape[1]


def _taper(x, scale, *bounds):
    # scale * distance to the boundary of the box given by bounds
    d = x.shape[1]
    bb = np.array(bounds, dtype=float).reshape(d, 2)
    dist = np.min(np.minimum(x - bb[:, 0], bb[:, 1] - x), axis=1)
    return scale * np.clip(dist, 0.0, None)


FIELD_EXPRESSIONS = {
    "affine": _affine,
    "vee": _vee,
    "power_well": _power_well,
    "cosine": _cosine,
    "sine_sum": _sine_sum,
    "taper": _taper,
}

_EXPR_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def parse_expression(text: str):
    """Return ``f(points) -> values`` for ``"name(a, b, ...)"``."""
    m = _EXPR_RE.match(text)
    if not m or m.group(1) not in FIELD_EXPRESSIONS:
        raise ValueError(f"unknown field expression {text!r}; known: {sorted(FIELD_EXPRESSIONS)}")
    fn = FIELD_EXPRESSIONS[m.group(1)]
    args = [float(a) for a in m.group(2).split(",")] if m.group(2) and m.group(2).strip() else []
    return lambda pts: fn(np.atleast_2d(pts), *args)


def sample_field(spec, grid: DomainGrid, base_dir=None) -> np.ndarray:
    """Evaluate a field spec (``const:v``, ``expr:...`` or ``file:path``) on the grid."""
    if isinstance(spec, (int, float)):
        return np.full(grid.n, float(spec))
    kind, _, rest = str(spec).partition(":")
    if kind == "const":
        return np.full(grid.n, float(rest))
    if kind == "expr":
        return np.asarray(parse_expression(rest)(grid.points), dtype=float)
    if kind == "file":
        from .io import read_field

        path = rest
        if base_dir is not None and not path.startswith("/"):
            import os

            path = os.path.join(base_dir, path)
        vals = read_field(path)
        if len(vals) != grid.n:
            raise ValueError(f"field file {path} has {len(vals)} values, grid has {grid.n} nodes")
        return vals
    raise ValueError(f"unrecognised field spec {spec!r}")
