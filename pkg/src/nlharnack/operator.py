"""Quadrature assembly of  L u(x) = int J((x-y)/g(y)) u(y) / g(y)^d dy - b(x) u(x).

Midpoint rule on the node lattice.  Kernel arguments are formed from integer
lattice offsets, so the entries that build column j of K and the exit rate
a(x_j) are the very same floating-point numbers.

Each column is divided by the kernel's mass on the *infinite* lattice,

    F_j = sum_{k in Z^d} J(k h / g_j) h^d / g_j^d,

which is 1 + O(h) for the node-centre rule.  With this normalisation
a_j = sum_{i in Omega} K_ij <= 1 holds exactly in floating point (all sums are
correctly rounded with math.fsum, and the Omega terms are a subset of the
lattice terms), and a_n <= a_{n+1} on nested aligned domains is exact too.
Pass ``normalize=False`` for the raw node-centre rule.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from .grid import DomainGrid, ScenarioFields
from .kernel import KernelProfile

DENSE_FRACTION = 0.25
DENSE_MAX_NODES = 10_000


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """K (sparse CSR or dense ndarray), b, the exit rate a and the weights.

    ``col_scale[j] = 1 / F_j`` is the lattice mass correction applied to
    column j (1 on singular columns); constants derived from the box bounds
    of J must be multiplied by its min / max.
    """

    K: object
    b_diag: np.ndarray
    a_vec: np.ndarray
    weights: np.ndarray
    col_scale: np.ndarray
    singular: np.ndarray
    support_radius: float

    @property
    def n(self) -> int:
        return len(self.a_vec)

    @property
    def dense(self) -> bool:
        return isinstance(self.K, np.ndarray)

    def matvec(self, u) -> np.ndarray:
        return np.asarray(self.K @ u).ravel()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.K.sum(axis=1)).ravel()

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.K.sum(axis=0)).ravel()

    def with_b(self, b) -> "DiscreteOperator":
        b = np.asarray(b, dtype=float)
        if b.shape != self.a_vec.shape:
            raise ValueError("b must have one value per node")
        return replace(self, b_diag=b)

    def normalized(self) -> "DiscreteOperator":
        """Same K with b = a (the operator whose Perron root is 1)."""
        return self.with_b(self.a_vec)

    @property
    def scale_min(self) -> float:
        s = self.col_scale[~self.singular]
        return float(s.min()) if s.size else 1.0

    @property
    def scale_max(self) -> float:
        s = self.col_scale[~self.singular]
        return float(s.max()) if s.size else 1.0

    def toarray(self) -> np.ndarray:
        return self.K if self.dense else self.K.toarray()

    def T_dense(self) -> np.ndarray:
        return self.toarray() / self.a_vec[:, None]


def _stencil(d, radius_cells):
    R = int(math.floor(radius_cells)) + 1
    rng = np.arange(-R, R + 1)
    if d == 1:
        offs = rng[:, None]
    else:
        a, b = np.meshgrid(rng, rng, indexing="ij")
        offs = np.stack([a.ravel(), b.ravel()], axis=1)
    dist = np.linalg.norm(offs, axis=1)
    keep = dist <= radius_cells * (1 + 1e-12) + 1e-12
    return offs[keep], dist[keep]


def _column_terms(profile, fields, normalize):
    """Yield (j, target lattice offsets, values t_k, lattice mass F_j)."""
    grid = fields.grid
    g = fields.g
    h = grid.h
    d = grid.d
    gmax = float(g[~fields.singular].max()) if (~fields.singular).any() else 0.0
    offs, dist = _stencil(d, profile.R0 * gmax / h)
    cache = {}
    for j in range(grid.n):
        if fields.singular[j]:
            continue
        gj = float(g[j])
        if gj not in cache:
            z = dist * h / gj
            keep = z <= profile.R0 * (1 + 1e-12)
            t = profile.radial(z[keep]) * (h / gj) ** d
            nz = t > 0
            t = t[nz]
            cache[gj] = (offs[keep][nz], t, math.fsum(t) if normalize else 1.0)
        o, t, F = cache[gj]
        yield j, o, t, F


def _column_mass(tv, t, F):
    # an untruncated column sums to F exactly
    return 1.0 if len(tv) == len(t) and F != 1.0 else math.fsum(tv) / F


def assemble_operator(profile: KernelProfile, fields: ScenarioFields, normalize: bool = True,
                      storage: str = "auto") -> DiscreteOperator:
    """Assemble K with K[i, j] = J((x_i - x_j)/g_j) w / g_j^d / F_j.

    Columns of singular nodes (g <= vanish_threshold) are zero and a = 1
    there.  Storage is dense when the expected fill exceeds 25%.
    """
    grid = fields.grid
    g = fields.g
    if np.any(g < 0):
        j = int(np.argmin(g))
        raise ValueError(f"negative dispersal radius g = {g[j]} at node {j}")
    if profile.d != grid.d:
        raise ValueError("kernel and grid dimensions differ")
    n = grid.n
    gmax = float(g[~fields.singular].max()) if (~fields.singular).any() else 0.0
    support = profile.R0 * gmax
    stencil_size = len(_stencil(grid.d, support / grid.h)[0]) if gmax > 0 else 0
    fill = min(1.0, stencil_size / n)
    use_dense = storage == "dense" or (storage == "auto" and fill >= DENSE_FRACTION)
    if use_dense and n > DENSE_MAX_NODES:
        raise MemoryError(
            f"dense storage for {n} nodes (expected fill {fill:.2f}) exceeds the "
            f"{DENSE_MAX_NODES}-node limit; coarsen h or reduce the support radius "
            f"(need roughly {n * n * 8 / 2**20:.0f} MiB)")

    lat2node = grid.lattice_to_node
    shape = np.array(grid.shape)
    rows, cols, vals = [], [], []
    a = np.ones(n)
    col_scale = np.ones(n)
    for j, o, t, F in _column_terms(profile, fields, normalize):
        tgt = grid.node_lattice[j] + o
        if grid.periodic:
            tgt = np.mod(tgt, shape)
            ok = np.ones(len(tgt), dtype=bool)
        else:
            ok = np.all((tgt >= 0) & (tgt < shape), axis=1)
        tgt = tgt[ok]
        tv = t[ok]
        i = lat2node[tuple(tgt.T)]
        inside = i >= 0
        i = i[inside]
        tv = tv[inside]
        if grid.periodic:
            # a wrapped stencil can revisit a node; merge duplicates
            uniq, inv = np.unique(i, return_inverse=True)
            if len(uniq) != len(i):
                tv = np.array([math.fsum(tv[inv == k]) for k in range(len(uniq))])
                i = uniq
        a[j] = _column_mass(tv, t, F) if not grid.periodic else math.fsum(tv) / F
        col_scale[j] = 1.0 / F
        rows.append(i)
        cols.append(np.full(len(i), j))
        vals.append(tv / F)

    w = grid.weight
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        # K entries carry the quadrature weight of the source node; the exit
        # rate sums the same numbers over destinations
        data = np.concatenate(vals)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        data = np.zeros(0)
    K = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    K.sort_indices()
    if use_dense:
        K = K.toarray()
    a[fields.singular] = 1.0
    return DiscreteOperator(K=K, b_diag=fields.b.copy(), a_vec=a, weights=np.full(n, w),
                            col_scale=col_scale, singular=fields.singular.copy(),
                            support_radius=support)


def exit_rate(profile: KernelProfile, fields: ScenarioFields, normalize: bool = True) -> np.ndarray:
    """a(x_j) = sum_i J((x_i - x_j)/g_j) w / g_j^d  (1 on the singular set).

    Built from the same lattice terms as :func:`assemble_operator`.
    """
    grid = fields.grid
    shape = np.array(grid.shape)
    lat2node = grid.lattice_to_node
    a = np.ones(grid.n)
    for j, o, t, F in _column_terms(profile, fields, normalize):
        tgt = grid.node_lattice[j] + o
        if grid.periodic:
            tgt = np.mod(tgt, shape)
            ok = np.ones(len(tgt), dtype=bool)
        else:
            ok = np.all((tgt >= 0) & (tgt < shape), axis=1)
        i = lat2node[tuple(tgt[ok].T)]
        tv = t[ok][i >= 0]
        a[j] = _column_mass(tv, t, F) if not grid.periodic else math.fsum(tv) / F
    return a


def apply_L(op: DiscreteOperator, u) -> np.ndarray:
    """L u = K u - b u."""
    u = np.asarray(u, dtype=float)
    if u.shape != (op.n,):
        raise ValueError(f"u has shape {u.shape}, operator acts on {op.n} nodes")
    return op.matvec(u) - op.b_diag * u


@dataclass(frozen=True)
class EllipticMoments:
    """Second moments a_ij, first moments b_i and zeroth-order term c at a node."""

    a: np.ndarray
    b: np.ndarray
    c: float
    degenerate: bool = False


def elliptic_moments(profile: KernelProfile, fields: ScenarioFields, x: int,
                     op: DiscreteOperator | None = None) -> EllipticMoments:
    """Formal Taylor coefficients of L at node x.

    a_ij = 1/2 sum_y K[x,y] z_i z_j,  b_i = sum_y K[x,y] z_i,  c = b(x) - sum_y K[x,y]
    with z = x - y.  Pass a prebuilt ``op`` to avoid reassembly.
    """
    if op is None:
        op = assemble_operator(profile, fields)
    grid = fields.grid
    i = int(x)
    if op.dense:
        row = op.K[i]
        cols = np.flatnonzero(row)
        kv = row[cols]
    else:
        start, stop = op.K.indptr[i], op.K.indptr[i + 1]
        cols = op.K.indices[start:stop]
        kv = op.K.data[start:stop]
    d = grid.d
    if len(cols) == 0:
        return EllipticMoments(np.zeros((d, d)), np.zeros(d), float(op.b_diag[i]), degenerate=True)
    z = grid.points[i] - grid.points[cols]
    if grid.periodic:
        L = grid.bounds[0][1] - grid.bounds[0][0]
        z = z - L * np.round(z / L)
    second = 0.5 * np.einsum("k,ki,kj->ij", kv, z, z)
    second = 0.5 * (second + second.T)
    first = kv @ z
    c = float(op.b_diag[i] - math.fsum(kv))
    return EllipticMoments(second, first, c)


# -- hypotheses ---------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisResult:
    name: str
    passed: bool
    value: float
    witness: str = ""


@dataclass(frozen=True)
class ValidationReport:
    results: tuple

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name) -> HypothesisResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failed(self):
        return [r.name for r in self.results if not r.passed]


def validate_hypotheses(profile: KernelProfile, fields: ScenarioFields,
                        mass_tol: float = 1e-9) -> ValidationReport:
    """Check H1-H4 and the compactness of the singular set; failures are reported, not raised."""
    grid = fields.grid
    out = []

    # H1: bounded and unit mass
    mass = profile.mass()
    finite = math.isfinite(profile.sup_norm()) and math.isfinite(mass)
    out.append(HypothesisResult("H1", finite and abs(mass - 1.0) <= mass_tol, mass,
                                f"mass={mass!r}"))

    # H2: box bounds on a radial sampling lattice
    rmax = 1.5 * max(profile.R0, 1.0)
    rs = np.union1d(np.linspace(0.0, rmax, 6001), profile.breakpoints())
    J = profile.radial(rs)
    low_bad = (rs <= profile.r0) & (J < profile.m0 * (1 - 1e-12))
    high_bad = (J > profile.M0 * (1 + 1e-12)) | ((rs > profile.R0) & (J > 0))
    if low_bad.any():
        r = rs[np.argmax(low_bad)]
        out.append(HypothesisResult("H2_lower", False, float(profile.radial(r)),
                                    f"J({r:.6g})={float(profile.radial(r)):.6g} < m0={profile.m0:.6g}"))
    else:
        out.append(HypothesisResult("H2_lower", True, profile.m0))
    if high_bad.any():
        r = rs[np.argmax(high_bad)]
        out.append(HypothesisResult("H2_upper", False, float(profile.radial(r)),
                                    f"J({r:.6g})={float(profile.radial(r)):.6g} outside M0*1_B(0,{profile.R0:g})"))
    else:
        out.append(HypothesisResult("H2_upper", True, profile.M0))

    # H3: 0 <= g <= beta and local integrability of 1/g^(d p)
    g = fields.g
    bad = (g < 0) | (g > fields.beta * (1 + 1e-12))
    nonsing = ~fields.singular
    if not grid.periodic:
        interior = grid.boundary_distance() > grid.h
    else:
        interior = np.ones(grid.n, dtype=bool)
    sel = nonsing & interior
    with np.errstate(divide="ignore"):
        integrand = 1.0 / g[sel] ** (grid.d * fields.p_exponent)
    integral = math.fsum(integrand) * grid.weight if sel.any() else 0.0
    ok3 = (not bad.any()) and math.isfinite(integral)
    wit = f"g[{int(np.argmax(bad))}]={g[np.argmax(bad)]:.6g}" if bad.any() else f"int 1/g^(dp)={integral:.6g}"
    out.append(HypothesisResult("H3", ok3, integral, wit))

    # H4: b > 0 with inf b > 0
    bmin = float(fields.b.min())
    out.append(HypothesisResult("H4", bmin > 0, bmin,
                                f"b[{int(np.argmin(fields.b))}]={bmin:.6g}"))

    # S compactly inside Omega
    S = fields.singular
    if not S.any():
        out.append(HypothesisResult("S_compact", True, math.inf, "S empty"))
    elif grid.periodic:
        out.append(HypothesisResult("S_compact", True, math.inf, "periodic domain"))
    else:
        dist = grid.boundary_distance()[S]
        k = int(np.argmin(dist))
        out.append(HypothesisResult("S_compact", bool(dist.min() > grid.h), float(dist.min()),
                                    f"node {int(np.flatnonzero(S)[k])}"))
    return ValidationReport(tuple(out))


def column_scale(profile: KernelProfile, fields: ScenarioFields, normalize: bool = True) -> np.ndarray:
    """1 / F_j per node (1 on singular nodes) without assembling K."""
    grid = fields.grid
    out = np.ones(grid.n)
    if not normalize:
        return out
    g = fields.g
    ok = ~fields.singular
    if not ok.any():
        return out
    offs, dist = _stencil(grid.d, profile.R0 * float(g[ok].max()) / grid.h)
    cache = {}
    for j in np.flatnonzero(ok):
        gj = float(g[j])
        if gj not in cache:
            z = dist * grid.h / gj
            t = profile.radial(z[z <= profile.R0 * (1 + 1e-12)]) * (grid.h / gj) ** grid.d
            cache[gj] = 1.0 / math.fsum(t[t > 0])
        out[j] = cache[gj]
    return out
