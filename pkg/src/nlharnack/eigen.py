"""Principal eigenpair of T u = (1/a) K u.

Power iteration on bounded domains, a mollification schedule for rough
kernels, and nested domain truncations for unbounded media.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import csgraph

from .errors import ConvergenceError, PreconditionError
from .grid import DomainGrid, ScenarioFields, parse_expression
from .kernel import KernelProfile
from .operator import DiscreteOperator, assemble_operator

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


class ReducibilityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    phi: np.ndarray
    residual_inf: float
    iterations: int
    normalization: str = "sup_one"
    anchor: int | None = None
    reducible: bool = False
    components: tuple = ()
    support: np.ndarray | None = None

    @property
    def lambda_(self) -> float:
        return self.lam


def _normalize(phi, normalization, anchor):
    if normalization == "sup_one":
        return phi / phi.max()
    if normalization == "point_value":
        if anchor is None:
            raise ValueError("point_value normalization needs an anchor node")
        if not phi[anchor] > 0:
            raise PreconditionError(f"eigenfunction vanishes at the anchor node {anchor}")
        return phi / phi[anchor]
    raise ValueError(f"unknown normalization {normalization!r}")


def _iterate(T, x, tol, max_iter, stall=5000):
    """Plain power iteration on a nonnegative matrix; returns (lam, x, res, its)."""
    x = np.asarray(x, dtype=float)
    x = x / np.abs(x).max()
    best = math.inf
    best_it = 0
    res = math.inf
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = np.asarray(T @ x).ravel()
        lam = float(x @ y) / float(x @ x)
        res = float(np.abs(y - lam * x).max()) / float(np.abs(x).max())
        if res <= tol:
            return lam, x, res, it
        if res < 0.5 * best:
            best, best_it = res, it
        elif it - best_it > stall:
            raise ConvergenceError(
                f"power iteration stalled at residual {res:.3e} (tol {tol:.1e})",
                residual=res, iterations=it)
        ymax = np.abs(y).max()
        if ymax == 0:
            return 0.0, x, 0.0, it
        x = y / ymax
    raise ConvergenceError(
        f"power iteration did not reach tol {tol:.1e} in {max_iter} iterations "
        f"(last residual {res:.3e})", residual=res, iterations=max_iter)


def _classes(K):
    """Strong components of the support graph (edge j -> i when K[i, j] > 0)."""
    A = sparse.csr_matrix(K) if not sparse.issparse(K) else K.tocsr()
    A = (A != 0).astype(np.int8)
    ncomp, labels = csgraph.connected_components(A.T, directed=True, connection="strong")
    diag = A.diagonal() != 0
    sizes = np.bincount(labels, minlength=ncomp)
    nontrivial = [c for c in range(ncomp) if sizes[c] > 1 or diag[labels == c].any()]
    return A, labels, nontrivial


def _descendants(A, start_mask):
    # nodes reachable from start_mask along j -> i edges
    reach = start_mask.copy()
    frontier = start_mask.copy()
    AT = A  # row i lists the sources j of i; propagate with A @ indicator
    while frontier.any():
        new = (np.asarray(AT @ frontier.astype(np.int8)).ravel() > 0) & ~reach
        reach |= new
        frontier = new
    return reach


def power_iterate(op: DiscreteOperator, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  x0=None, normalization: str = "sup_one", anchor: int | None = None) -> EigenPair:
    """Perron pair of T = diag(1/a) K by power iteration.

    With one nontrivial strongly connected class the pair is returned directly
    (phi vanishes on nodes that the class cannot reach).  Several classes give
    one pair per class in ``components``, a :class:`ReducibilityWarning`, and
    the dominant one as the main result.
    """
    n = op.n
    a = op.a_vec
    T = sparse.diags(1.0 / a) @ op.K if not op.dense else op.K / a[:, None]
    if sparse.issparse(T):
        T = T.tocsr()
    A, labels, nontrivial = _classes(op.K)
    if not nontrivial:
        phi = np.zeros(n)
        return EigenPair(0.0, phi, 0.0, 0, normalization, anchor, support=np.zeros(n, dtype=bool))
    start = np.ones(n) if x0 is None else np.clip(np.asarray(x0, dtype=float), 0.0, None)
    if x0 is not None and not np.any(start > 0):
        start = np.ones(n)

    def solve_on(mask):
        idx = np.flatnonzero(mask)
        sub = T[idx][:, idx] if sparse.issparse(T) else T[np.ix_(idx, idx)]
        s0 = start[idx]
        if not np.any(s0 > 0):
            s0 = np.ones(len(idx))
        # a positive start keeps the component of the Perron vector
        s0 = np.where(s0 > 0, s0, s0[s0 > 0].min())
        lam, x, res, its = _iterate(sub, s0, tol, max_iter)
        phi = np.zeros(n)
        phi[idx] = np.clip(x, 0.0, None)
        return lam, phi, res, its

    if len(nontrivial) == 1:
        cmask = labels == nontrivial[0]
        reach = _descendants(A, cmask)
        lam, phi, res, its = solve_on(reach)
        phi = _normalize(phi, normalization, anchor)
        return EigenPair(lam, phi, res, its, normalization, anchor, support=reach)

    warnings.warn(f"support graph is reducible: {len(nontrivial)} nontrivial classes; "
                  "returning one eigenpair per class", ReducibilityWarning, stacklevel=2)
    comps = []
    for c in nontrivial:
        cmask = labels == c
        others = np.isin(labels, [k for k in nontrivial if k != c])
        reach = _descendants(A, cmask) & ~others
        lam, phi, res, its = solve_on(reach)
        norm = normalization
        if normalization == "point_value" and (anchor is None or not reach[anchor]):
            norm = "sup_one"
        phi = _normalize(phi, norm, anchor)
        comps.append(EigenPair(lam, phi, res, its, norm, anchor, support=reach))
    main = max(comps, key=lambda p: (p.lam, -int(np.flatnonzero(p.support)[0])))
    return EigenPair(main.lam, main.phi, main.residual_inf, sum(p.iterations for p in comps),
                     main.normalization, anchor, reducible=True, components=tuple(comps),
                     support=main.support)


def dense_eigenpair(op: DiscreteOperator) -> tuple[float, np.ndarray]:
    """Oracle: full eigendecomposition of T, Perron pair aligned to sup phi = 1."""
    T = op.T_dense()
    w, V = linalg.eig(T)
    k = int(np.argmax(w.real))
    v = V[:, k].real
    if v.sum() < 0:
        v = -v
    return float(w[k].real), v / v.max()


def left_vector_defect(op: DiscreteOperator) -> float:
    """|| (a w)^T T - (a w)^T ||_inf / || a w ||_inf, restricted to non-singular columns."""
    aw = op.a_vec * op.weights
    # (a w)^T T = w^T K since T = diag(1/a) K
    lhs = np.asarray(op.weights @ op.K).ravel()
    diff = np.abs(lhs - aw)[~op.singular]
    return float(diff.max() / np.abs(aw).max()) if diff.size else 0.0


# -- mollification -----------------------------------------------------------------

def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


_BUMP_NORM = {}


def _bump_norm(d):
    if d not in _BUMP_NORM:
        if d == 1:
            val = 2.0 * integrate.quad(lambda r: float(_bump(np.array(r))), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)[0]
        else:
            val = 2.0 * math.pi * integrate.quad(lambda r: r * float(_bump(np.array(r))), 0.0, 1.0,
                                                 epsabs=1e-15, epsrel=1e-13)[0]
        _BUMP_NORM[d] = val
    return _BUMP_NORM[d]


def mollifier(d: int, width: float):
    """rho_w(z) = rho(|z| / w) / w^d with rho the unit-mass exp(-1/(1-|z|^2)) bump."""
    c = _bump_norm(d)
    return lambda r: _bump(np.asarray(r) / width) / (c * width ** d)


@lru_cache(maxsize=64)
def mollify(profile: KernelProfile, width: float, samples: int = 401) -> KernelProfile:
    """Tabulate J * rho_width on [0, R0 + width] as a piecewise-linear profile.

    The table is rescaled to unit mass; the box bounds become
    r0 - width, min of the table on that ball, and R0 + width.
    """
    if width < 0:
        raise ValueError("width must be nonnegative")
    if width == 0:
        return profile
    if width >= profile.r0:
        raise ValueError(f"mollifier width {width} must be below r0 = {profile.r0}")
    d = profile.d
    R = profile.R0 + width
    rs = np.linspace(0.0, R, samples)
    rho = mollifier(d, width)
    bps = profile.breakpoints()
    vals = np.empty(samples)
    if d == 1:
        for k, r in enumerate(rs):
            pts = sorted({float(r - b) for b in bps} | {float(r + b) for b in bps})
            pts = [p for p in pts if -width < p < width]
            f = lambda s: float(profile.radial(abs(r - s)) * rho(abs(s)))
            vals[k] = integrate.quad(f, -width, width, points=pts or None, limit=200,
                                     epsabs=1e-14, epsrel=1e-12)[0]
    else:
        # polar quadrature in the mollifier variable
        gx, gw = np.polynomial.legendre.leggauss(96)
        rad = 0.5 * width * (gx + 1.0)
        radw = 0.5 * width * gw
        nt = 720
        th = (np.arange(nt) + 0.5) * (math.pi / nt)
        thw = math.pi / nt
        Rr, Th = np.meshgrid(rad, th, indexing="ij")
        wts = (radw[:, None] * Rr * thw) * rho(Rr) * 2.0
        for k, r in enumerate(rs):
            dist = np.sqrt((r - Rr * np.cos(Th)) ** 2 + (Rr * np.sin(Th)) ** 2)
            vals[k] = float(np.sum(profile.radial(dist) * wts))
    vals[-1] = 0.0
    vals = np.clip(vals, 0.0, None)
    return KernelProfile.from_table(d, list(zip(rs, vals)), r0=profile.r0 - width,
                                    normalize=True, smooth=True)


def l1_distance(p: KernelProfile, q: KernelProfile, n: int = 200_001) -> float:
    """|| J_p - J_q ||_{L1(R^d)} by the radial midpoint rule."""
    R = max(p.R0, q.R0)
    hr = R / n
    r = (np.arange(n) + 0.5) * hr
    diff = np.abs(p.radial(r) - q.radial(r))
    if p.d == 1:
        return float(2.0 * diff.sum() * hr)
    return float(2.0 * math.pi * (diff * r).sum() * hr)


# -- schedules -------------------------------------------------------------------

@dataclass(frozen=True)
class MollifierSchedule:
    widths: tuple
    quadrature_refine: bool = False

    def __post_init__(self):
        w = tuple(float(x) for x in self.widths)
        if not w:
            raise ValueError("schedule needs at least one width")
        if any(x < 0 for x in w) or any(b >= a for a, b in zip(w, w[1:])):
            raise ValueError("mollifier widths must be nonnegative and strictly decreasing")
        object.__setattr__(self, "widths", w)


@dataclass(frozen=True)
class BoundedSolveResult:
    pair: EigenPair
    stages: tuple
    max_sup_diff: float
    converged: bool
    c_stable: bool
    profiles: tuple = ()

    def rows(self):
        return [(s["width"], s["h"], s["lambda"], s["residual"], s["iterations"], s["sup_diff"], s["C_J"])
                for s in self.stages]


def _fill_lattice(grid: DomainGrid, values):
    from scipy import ndimage

    lat = np.full(grid.shape, np.nan)
    lat[tuple(grid.node_lattice.T)] = values
    if grid.lattice_mask.all():
        return lat
    _, ind = ndimage.distance_transform_edt(~grid.lattice_mask, return_indices=True)
    return lat[tuple(ind)]


def interpolate_field(grid: DomainGrid, values, points) -> np.ndarray:
    """Linear interpolation of node values (nearest-value extension outside)."""
    lat = _fill_lattice(grid, values)
    axes = grid._axes
    pts = np.atleast_2d(points)
    pts = np.column_stack([np.clip(pts[:, k], axes[k][0], axes[k][-1]) for k in range(grid.d)])
    if any(len(a) < 2 for a in axes):
        return lat[tuple(np.zeros((grid.d, len(pts)), dtype=int))]
    f = RegularGridInterpolator(tuple(axes), lat, method="linear")
    return f(pts)


def _refined(fields: ScenarioFields, h_new: float) -> ScenarioFields:
    grid = fields.grid
    fine = DomainGrid(grid.bounds, h_new, grid.boxes, grid.periodic)
    g = interpolate_field(grid, fields.g, fine.points)
    b = interpolate_field(grid, fields.b, fine.points)
    return ScenarioFields(fine, g, b, fields.beta, fields.p_exponent, fields.vanish_threshold)


def solve_bounded(scenario, schedule: MollifierSchedule, tol: float = DEFAULT_TOL,
                  compact=None, max_iter: int = DEFAULT_MAX_ITER) -> BoundedSolveResult:
    """Solve with J * rho_w for each scheduled width; phi_n is scaled so that
    its minimum over ``compact`` (a node mask, default all of Omega) is 1.

    Successive sup differences on the compact and C(J_n) = sup/inf are recorded;
    two increases of the difference mark the run as not converged.
    """
    profile, fields = scenario.profile, scenario.fields
    grid0 = fields.grid
    mask0 = np.ones(grid0.n, dtype=bool) if compact is None else np.asarray(compact, dtype=bool)
    if not mask0.any():
        raise PreconditionError("compact set is empty")
    stages, profiles = [], []
    prev_on0 = None
    prev_phi = None
    prev_grid = None
    pair = None
    for w in schedule.widths:
        prof = mollify(profile, w)
        profiles.append(prof)
        f = fields
        if schedule.quadrature_refine and w > 0 and grid0.h > w / 4:
            k = math.ceil(math.log2(grid0.h / (w / 4)))
            f = _refined(fields, grid0.h / 2 ** k)
        grid = f.grid
        op = assemble_operator(prof, f).normalized()
        x0 = None
        if prev_phi is not None:
            x0 = prev_phi if prev_grid is grid else interpolate_field(prev_grid, prev_phi, grid.points)
        pair = power_iterate(op, tol=tol, max_iter=max_iter, x0=x0)
        phi = pair.phi
        on0 = phi if grid is grid0 else interpolate_field(grid, phi, grid0.points)
        scale = on0[mask0].min()
        if not scale > 0:
            raise PreconditionError("eigenfunction vanishes on the compact set")
        on0 = on0 / scale
        phi = phi / scale
        diff = math.nan if prev_on0 is None else float(np.abs(on0 - prev_on0)[mask0].max())
        stages.append({"width": w, "h": grid.h, "lambda": pair.lam, "residual": pair.residual_inf,
                       "iterations": pair.iterations, "sup_diff": diff,
                       "C_J": float(on0[mask0].max() / on0[mask0].min())})
        prev_on0, prev_phi, prev_grid = on0, phi, grid
        pair = EigenPair(pair.lam, phi, pair.residual_inf, pair.iterations, "inf_compact_one",
                         None, pair.reducible, pair.components, pair.support)
    diffs = [s["sup_diff"] for s in stages if not math.isnan(s["sup_diff"])]
    increases = sum(1 for a, b in zip(diffs, diffs[1:]) if b > a)
    cs = [s["C_J"] for s in stages]
    c_stable = len(cs) < 3 or abs(cs[-1] - cs[-2]) <= abs(cs[-2] - cs[-3]) + 1e-12 * cs[-1]
    return BoundedSolveResult(pair, tuple(stages), max(diffs) if diffs else 0.0,
                              increases < 2, bool(c_stable), tuple(profiles))


# -- exhaustion ----------------------------------------------------------------------

@dataclass(frozen=True)
class UnboundedScenario:
    """Kernel plus a dispersal radius defined on all of R^d.

    ``g`` is a callable of an (n, d) point array or a field expression string.
    """

    profile: KernelProfile
    g: object
    beta: float
    vanish_threshold: float = 0.0
    p_exponent: float = 2.0

    def fields_on(self, grid: DomainGrid) -> ScenarioFields:
        g = self.g
        if isinstance(g, (int, float)):
            vals = np.full(grid.n, float(g))
        elif isinstance(g, str):
            spec = g[5:] if g.startswith("expr:") else g
            if spec.startswith("const:"):
                vals = np.full(grid.n, float(spec[6:]))
            else:
                vals = parse_expression(spec)(grid.points)
        else:
            vals = np.asarray(g(grid.points), dtype=float)
        return ScenarioFields(grid, vals, np.ones(grid.n), self.beta, self.p_exponent, self.vanish_threshold)


@dataclass(frozen=True)
class ExhaustionSchedule:
    domains: tuple
    x0: tuple
    eta1: float

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "x0", tuple(np.atleast_1d(np.asarray(self.x0, dtype=float))))
        if not self.domains:
            raise ValueError("exhaustion needs at least one domain")
        for a, b in zip(self.domains, self.domains[1:]):
            if not b.contains(a):
                raise PreconditionError("exhaustion domains must be nested on a common lattice")


@dataclass(frozen=True)
class ExhaustionResult:
    pair: EigenPair
    phi_omega0: np.ndarray
    stages: tuple
    phis: tuple
    a_monotone: bool
    a_bounded: bool
    stopped_early: bool

    def rows(self):
        return [(s["stage"], s["sup_diff"], s["lambda"], s["residual"]) for s in self.stages]


def solve_exhaustion(scenario: UnboundedScenario, schedule: ExhaustionSchedule, tol: float = DEFAULT_TOL,
                     stop_tol: float = 0.0, max_iter: int = DEFAULT_MAX_ITER,
                     sup_bound: Callable | None = None) -> ExhaustionResult:
    """Solve on each truncation Omega_n with phi_n(x0) = 1.

    Checks a_n <= a_{n+1} node-wise on Omega_n and a <= 1, monitors the sup
    difference of consecutive eigenfunctions on Omega_0 and stops once it
    falls below ``stop_tol``.  ``sup_bound(stage, fields, pair)`` may return a
    per-stage bound that is recorded alongside.
    """
    grids = schedule.domains
    g0 = grids[0]
    anchor0 = g0.nearest_node(np.array(schedule.x0))
    if np.linalg.norm(g0.points[anchor0] - np.array(schedule.x0)) > 0.5 * g0.h * math.sqrt(g0.d) + 1e-12:
        raise PreconditionError(f"anchor {schedule.x0} is not in Omega_0")
    stages, phis = [], []
    prev = None
    a_monotone = True
    a_bounded = True
    stopped = False
    pair = None
    for n, grid in enumerate(grids):
        fields = scenario.fields_on(grid)
        if n == 0 and not fields.g[anchor0] > schedule.eta1:
            raise PreconditionError(
                f"anchor must satisfy g(x0) > eta1: g = {fields.g[anchor0]:.6g}, eta1 = {schedule.eta1:.6g}")
        S = fields.singular
        if S.any() and not grid.periodic:
            if grid.boundary_distance()[S].min() <= grid.h:
                raise PreconditionError(f"vanishing set is not compactly inside Omega_{n}")
        op = assemble_operator(scenario.profile, fields).normalized()
        anchor = grid.nearest_node(np.array(g0.points[anchor0]))
        x0 = None
        if prev is not None:
            x0 = np.ones(grid.n)
            x0[grid.embed_index(prev["grid"])] = prev["phi"]
        pair = power_iterate(op, tol=tol, max_iter=max_iter, x0=x0,
                             normalization="point_value", anchor=anchor)
        if op.a_vec.max() > 1.0:
            a_bounded = False
        idx0 = grid.embed_index(g0)
        on0 = pair.phi[idx0]
        row = {"stage": n, "lambda": pair.lam, "residual": pair.residual_inf, "sup_diff": math.nan,
               "a_monotone": True}
        if prev is not None:
            emb = grid.embed_index(prev["grid"])
            ok = bool(np.all(prev["a"] <= op.a_vec[emb]))
            row["a_monotone"] = ok
            a_monotone &= ok
            row["sup_diff"] = float(np.abs(on0 - prev["on0"]).max())
        if sup_bound is not None:
            row["sup_bound"] = sup_bound(n, fields, pair)
        stages.append(row)
        phis.append(pair.phi)
        prev = {"grid": grid, "phi": pair.phi, "a": op.a_vec, "on0": on0}
        if n > 0 and row["sup_diff"] < stop_tol:
            stopped = n < len(grids) - 1
            break
    return ExhaustionResult(pair, prev["on0"], tuple(stages), tuple(phis), a_monotone, a_bounded, stopped)
