"""Scenario builders and independent oracles shared by the test modules."""
import itertools
import math

import numpy as np

from nlharnack import DomainGrid, KernelProfile, ScenarioFields, assemble_operator, exit_rate, power_iterate


def fields_1d(g, h=1 / 256, bounds=(0.0, 1.0), b=None, beta=None, **kw):
    grid = DomainGrid((bounds,), h)
    return make_fields(grid, g, b, beta, **kw)


def fields_2d(g, h=1 / 32, bounds=((0.0, 1.0), (0.0, 1.0)), b=None, beta=None, **kw):
    grid = DomainGrid(bounds, h)
    return make_fields(grid, g, b, beta, **kw)


def make_fields(grid, g, b=None, beta=None, profile=None, **kw):
    """``g`` is a constant or a callable of the node coordinates; b defaults to a."""
    gv = np.full(grid.n, float(g)) if np.isscalar(g) else np.asarray(g(grid.points), dtype=float)
    beta = float(gv.max()) if beta is None else beta
    bv = np.ones(grid.n) if b is None else (np.full(grid.n, float(b)) if np.isscalar(b) else b)
    f = ScenarioFields(grid, gv, bv, beta, **kw)
    if b is None:
        f = f.with_b(exit_rate(profile or KernelProfile.box(grid.d), f))
    return f


def eigen_solution(profile, fields):
    """Principal eigenfunction and the fields/operator it solves exactly (b = lambda a)."""
    op = assemble_operator(profile, fields).normalized()
    pair = power_iterate(op)
    fu = fields.with_b(pair.lam * op.a_vec)
    return pair, op.with_b(fu.b), fu


# -- oracles ---------------------------------------------------------------------------------

def brute_force_K(profile, fields):
    """K by the defining double loop, normalized by the infinite-lattice mass of each column."""
    grid = fields.grid
    pts = grid.points
    h, d, n = grid.h, grid.d, grid.n
    K = np.zeros((n, n))
    for j in range(n):
        gj = fields.g[j]
        if gj <= fields.vanish_threshold:
            continue
        R = int(math.ceil(profile.R0 * gj / h)) + 1
        F = 0.0
        for k in itertools.product(range(-R, R + 1), repeat=d):
            F += float(profile.radial(np.array([np.linalg.norm(k) * h / gj]))[0]) * (h / gj) ** d
        for i in range(n):
            z = np.linalg.norm(pts[i] - pts[j]) / gj
            K[i, j] = float(profile.radial(np.array([z]))[0]) * (h / gj) ** d / F
    return K


def dense_perron(K, a):
    """Perron pair of diag(1/a) K from a full eigendecomposition."""
    T = K / a[:, None]
    vals, vecs = np.linalg.eig(T)
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    return float(vals[k].real), v / v.max()


def annulus_cap_measure_mc(d, n=400_000, seed=7, cap_radius=17 / 16):
    """mu(A(0, 15/16, 1) cap B(z, cap_radius)), |z| = 15/16, by plain Monte Carlo on the square."""
    rng = np.random.default_rng(seed)
    if d == 1:
        x = rng.uniform(-1, 1, size=(n, 1))
        area = 2.0
    else:
        x = rng.uniform(-1, 1, size=(n, 2))
        area = 4.0
    r = np.linalg.norm(x, axis=1)
    z = np.zeros(d)
    z[0] = 15 / 16
    hit = (r >= 15 / 16) & (r <= 1) & (np.linalg.norm(x - z, axis=1) <= cap_radius)
    return area * hit.mean()


def min_interval_cover(lo, hi, radius):
    """Fewest closed intervals of half-width ``radius`` covering [lo, hi]."""
    return max(1, math.ceil((hi - lo) / (2 * radius) - 1e-12))
