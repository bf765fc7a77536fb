"""Empirical Harnack ratios and the lemma-by-lemma checks, with the
constructive constants assembled from the covering machinery.

Constants are carried as natural logarithms: the chain factor C2^(N+2)
underflows a double long before the covers get large.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotSupermedianError, PreconditionError
from .geometry import (CompactSet, ConeSpec, ball_cover, chain_constant, dilate, erode,
                       inner_cone_check, level_set, log_contraction_constant)
from .grid import DIST_RTOL, DomainGrid, ScenarioFields, within
from .kernel import KernelProfile, unit_ball_volume
from .operator import DiscreteOperator, apply_L, assemble_operator, column_scale

LEMMA_RTOL = 1e-10
SUPERMEDIAN_RTOL = 1e-9
PAIR_CAP = 256
PAIR_ALL = 64


@dataclass(frozen=True)
class HarnackReport:
    name: str
    sup_val: float
    sup_witness: int | None
    inf_val: float
    inf_witness: int | None
    ratio: float
    log10_bound: float | None = None
    passed: bool | None = None
    status: str = "ok"
    sets_used: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    @property
    def bound(self) -> float | None:
        if self.log10_bound is None:
            return None
        return 10.0 ** self.log10_bound if self.log10_bound < 308 else math.inf

    @property
    def margin(self) -> float | None:
        """log10(bound) - log10(ratio); nonnegative iff the bound holds."""
        if self.log10_bound is None or not self.ratio > 0:
            return None
        return self.log10_bound - math.log10(self.ratio)

    @property
    def applicable(self) -> bool:
        return self.passed is not None


@dataclass(frozen=True)
class LemmaCheckReport:
    name: str
    lhs: float
    rhs: float
    log_constant: float
    margin: float
    scale: float
    passed: bool | None
    status: str = "ok"
    witness: int | None = None
    parts: tuple = ()
    details: dict = field(default_factory=dict)

    @property
    def constant(self) -> float:
        return math.exp(self.log_constant)

    @property
    def applicable(self) -> bool:
        return self.passed is not None

    @property
    def tolerance(self) -> float:
        return LEMMA_RTOL * self.scale


def _inapplicable(name, why, **details) -> LemmaCheckReport:
    return LemmaCheckReport(name, math.nan, math.nan, math.nan, math.nan, 0.0, None,
                            status=f"inapplicable: {why}", details=details)


def _lemma_report(name, lhs, rhs, log_c, witness=None, **details) -> LemmaCheckReport:
    crhs = math.exp(log_c + math.log(rhs)) if rhs > 0 else 0.0
    margin = lhs - crhs
    scale = max(abs(lhs), abs(crhs), 1e-300)
    return LemmaCheckReport(name, float(lhs), float(rhs), float(log_c), float(margin), scale,
                            bool(margin >= -LEMMA_RTOL * scale), witness=witness, details=details)


# -- scenario constants ---------------------------------------------------------------

@dataclass(frozen=True)
class KernelBounds:
    """Box bounds of the assembled kernel (lattice normalisation folded in)."""

    profile: KernelProfile
    scale_min: float
    scale_max: float

    @classmethod
    def of(cls, profile: KernelProfile, fields: ScenarioFields, op: DiscreteOperator | None = None):
        if op is not None:
            return cls(profile, op.scale_min, op.scale_max)
        s = column_scale(profile, fields)[~fields.singular]
        if s.size == 0:
            return cls(profile, 1.0, 1.0)
        return cls(profile, float(s.min()), float(s.max()))

    @property
    def m0(self) -> float:
        return self.profile.m0 * self.scale_min

    @property
    def sup(self) -> float:
        return self.profile.sup_norm() * self.scale_max

    def min_on_ball(self, radius: float) -> float:
        return self.profile.min_on_ball(radius) * self.scale_min


def log_membership_constant(kb: KernelBounds, fields: ScenarioFields, radius: float, alpha: float) -> float:
    """log of min_{B(0, radius/alpha)} J / (beta^d ||b||): valid for
    u(y) >= C int_{B(y, radius)} u wherever g >= alpha on the ball."""
    m = kb.min_on_ball(radius / alpha)
    if not m > 0:
        return -math.inf
    d = fields.grid.d
    return math.log(m) - d * math.log(fields.beta) - math.log(float(fields.b.max()))


def membership_constant(profile, fields, radius, alpha, op=None) -> float:
    return math.exp(log_membership_constant(KernelBounds.of(profile, fields, op), fields, radius, alpha))


def _extreme(u, mask, fn):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return math.nan, None
    k = int(fn(u[idx]))
    return float(u[idx[k]]), int(idx[k])


def _check_u(u, n):
    u = np.asarray(u, dtype=float)
    if u.shape != (n,):
        raise ValueError(f"u must have one value per node ({n})")
    return u


# -- constructive bound ----------------------------------------------------------------

def _reach_witness(x, cands, grid, g, r0, delta, tree_pts):
    """A node xb of ``cands`` with every node y of B(xb, delta) satisfying
    |x - y| <= r0 g(y).  Nearest candidates are tried first."""
    px = grid.points[x]
    dc = np.linalg.norm(grid.points[cands] - px, axis=1)
    order = np.lexsort((cands, dc))
    for k in order:
        if dc[k] > r0 * float(g.max()):
            break
        xb = int(cands[k])
        ball = grid.ball(xb, delta)
        dy = np.linalg.norm(grid.points[ball] - px, axis=1)
        if np.all(within(dy, r0 * g[ball])) and np.all(g[ball] > 0):
            return xb
    return None


def constructive_bound(omega: CompactSet, eta: float, fields: ScenarioFields, kb: KernelBounds,
                       eps: float | None = None, delta: float | None = None,
                       inf_set: CompactSet | None = None, dilation: float | None = None):
    """Assemble the sup/inf constant over ``omega`` from a maximum
    principle bound, the local domination lemma, the pointwise lower bound, and the
    ball chain.  Returns (log10 bound or None, status, sets, constants).

    ``inf_set`` defaults to Omega_eps cap omega.  Nodes of a larger inf-set
    outside Omega_eps need a reach witness (a delta-ball inside Omega_eps seen
    from x through the inner part of J).
    """
    grid = fields.grid
    prof = kb.profile
    d = grid.d
    beta = fields.beta
    eps_star = min(prof.r0 / 2, 0.25)
    eps = eps_star if eps is None else float(eps)
    if not 0 < eps <= eps_star * (1 + 1e-12):
        raise PreconditionError(f"eps = {eps} must lie in (0, min(r0/2, 1/4)] = (0, {eps_star}]")
    # 12 delta of erosion keeps the chain's triple dilation inside D; the
    # 1/sqrt(d) keeps box corners of D within eps*eta of the eroded set
    delta = eps * eta / (16 * math.sqrt(d)) if delta is None else float(delta)
    if not 0 < delta <= eps * eta / 16 * (1 + 1e-12):
        raise PreconditionError(f"delta = {delta} must lie in (0, eps*eta/16]")
    reach = prof.R0 * beta if dilation is None else dilation
    Om = dilate(omega, reach)
    W = level_set(fields, eta, "above")
    D = Om & W
    Oeps = erode(D, 12 * delta)
    sets = {"omega": omega.describe(), "Omega(omega)": Om.describe(), "D": D.describe(),
            "Omega_eps": Oeps.describe()}
    consts = {"eps": eps, "delta": delta, "eta": eta}
    target = (Oeps & omega) if inf_set is None else inf_set
    if target.empty:
        return None, "vacuous: inf-set empty", sets, consts, target
    if Oeps.empty:
        return None, "unresolved: Omega_eps empty", sets, consts, target

    # threshold on the degenerate part near omega
    Z = level_set(fields, eta, "below")
    near = dilate(omega, prof.R0 * eta)
    zmask = Z.mask & near.mask & ~fields.singular
    s_z = math.fsum(grid.weight / fields.g[zmask] ** d) if zmask.any() else 0.0
    binf = float(fields.b[omega.mask].min())
    consts["S_Z"] = s_z
    consts["S_Z_max"] = binf / (2 * kb.sup)
    if np.any(zmask & ~omega.mask):
        return None, "unresolved: Z_eta near omega leaves omega", sets, consts, target
    if s_z > binf / (2 * kb.sup):
        return None, "unresolved: eta threshold fails (eta above eta*)", sets, consts, target

    # Omega_eps must be within eps*eta of every node of D (local domination)
    if grid.distance_to_set(Oeps.mask)[D.mask].max() > eps * eta * (1 + DIST_RTOL) + 1e-14:
        return None, "unresolved: Omega_eps does not reach D", sets, consts, target
    if delta <= 0.5 * grid.h:
        return None, f"unresolved: delta = {delta:.3g} <= h/2", sets, consts, target

    bsup = float(fields.b.max())
    log_ceps = (math.log(kb.m0) + math.log(unit_ball_volume(d))
                + d * math.log(eps * eta / 4 / (8 * beta)) - math.log(bsup))
    log_c0p = log_membership_constant(kb, fields, 4 * delta, eta)
    if not math.isfinite(log_c0p):
        return None, "unresolved: J vanishes on B(0, 4 delta / eta)", sets, consts, target
    log_m = log_c0p

    outside = target.mask & ~Oeps.mask
    if outside.any():
        log_cone = math.log(kb.m0) - d * math.log(beta) - math.log(bsup)
        log_m = min(log_m, log_cone)
        consts["log_C0_cone"] = log_cone
        cands = Oeps.cells
        for x in np.flatnonzero(outside):
            if _reach_witness(int(x), cands, grid, fields.g, prof.r0, delta, None) is None:
                return None, f"unresolved: no reach witness for node {int(x)}", sets, consts, target

    cc = chain_constant(math.exp(log_m), 4 * delta, Oeps, require_interior=False)
    log_bound = (math.log(2 * kb.sup * cc.N) - math.log(binf) - d * math.log(eta)
                 - log_ceps - log_m - cc.log_C_pair)
    consts.update({"log_C_eps": log_ceps, "log_C0_prime": log_c0p, "log_C_membership": log_m,
                   "log_C_pair": cc.log_C_pair, "N": cc.N, "J_sup": kb.sup})
    return log_bound / math.log(10.0), "ok", sets, consts, target


# -- Harnack ratios -----------------------------------------------------------------------

def harnack_ratio(u, omega: CompactSet, eta: float, fields: ScenarioFields,
                  profile: KernelProfile | None = None, op: DiscreteOperator | None = None,
                  eps: float | None = None, delta: float | None = None,
                  cone: ConeSpec | None = None) -> HarnackReport:
    """sup over omega against inf over omega' cap omega, omega' = Omega_eps.

    With ``cone`` the inf-set is omega cap {g >= 2 eta} (inner cone version).
    A constructive bound is attached when ``profile`` is given.
    """
    grid = fields.grid
    u = _check_u(u, grid.n)
    if not eta > 0:
        raise PreconditionError("eta must be positive")
    if np.any(u <= 0):
        raise PreconditionError("u must be positive on Omega")
    if omega.empty:
        raise PreconditionError("omega is empty")
    sup_val, sup_w = _extreme(u, omega.mask, np.argmax)
    inf_set = None
    if cone is not None:
        cr = inner_cone_check(omega, cone)
        if not cr.passed:
            raise PreconditionError(f"omega fails the inner cone condition at node {cr.failing_node}")
        inf_set = omega & level_set(fields, 2 * eta, "above")
    log_b, status, sets, consts = None, "no-bound", {}, {}
    eps_star = 0.25 if profile is None else min(profile.r0 / 2, 0.25)
    if profile is not None:
        kb = KernelBounds.of(profile, fields, op)
        log_b, status, sets, consts, target = constructive_bound(omega, eta, fields, kb, eps, delta, inf_set)
    else:
        Om = dilate(omega, fields.beta)
        D = Om & level_set(fields, eta, "above")
        e = eps_star if eps is None else eps
        target = (erode(D, 0.75 * e * eta / math.sqrt(grid.d)) & omega) if inf_set is None else inf_set
        sets = {"omega": omega.describe(), "D": D.describe()}
    sets["inf_set"] = target.describe()
    if target.empty:
        return HarnackReport("harnack_ratio", sup_val, sup_w, math.nan, None, math.nan,
                             None, None, "vacuous: inf-set empty", sets, consts)
    inf_val, inf_w = _extreme(u, target.mask, np.argmin)
    ratio = sup_val / inf_val
    passed = None
    if log_b is not None:
        passed = bool(log_b >= 0 and math.log10(ratio) <= log_b)
    return HarnackReport("harnack_ratio", sup_val, sup_w, inf_val, inf_w, ratio, log_b, passed,
                         status, sets, consts)


def boundary_harnack(u, fields: ScenarioFields, profile: KernelProfile | None = None,
                     op: DiscreteOperator | None = None, cone: ConeSpec | None = None,
                     bound: float | None = None, eps: float | None = None) -> HarnackReport:
    """Global sup/inf over all nodes (needs g >= alpha > 0 everywhere).

    ``bound`` overrides the constructive constant.
    """
    grid = fields.grid
    u = _check_u(u, grid.n)
    alpha = float(fields.g.min())
    if not alpha > 0:
        raise PreconditionError(
            f"the up-to-the-boundary estimate needs g >= alpha > 0 on Omega; min g = {alpha:.6g}")
    if np.any(u <= 0):
        raise PreconditionError("u must be positive on Omega")
    full = CompactSet.full(grid)
    if cone is not None:
        cr = inner_cone_check(full, cone)
        if not cr.passed:
            raise PreconditionError(f"Omega fails the inner cone condition at node {cr.failing_node}")
    sup_val, sup_w = _extreme(u, full.mask, np.argmax)
    inf_val, inf_w = _extreme(u, full.mask, np.argmin)
    ratio = sup_val / inf_val
    sets = {"sup_set": "all nodes", "inf_set": "all nodes", "alpha": alpha}
    consts = {}
    status = "ok"
    if bound is not None:
        log_b = math.log10(bound) if bound > 0 else -math.inf
    elif profile is not None:
        kb = KernelBounds.of(profile, fields, op)
        log_b, status, s2, consts, _ = constructive_bound(full, alpha, fields, kb, eps=eps, inf_set=full)
        sets.update(s2)
    else:
        log_b, status = None, "no-bound"
    passed = None
    if log_b is not None:
        passed = bool(math.isfinite(ratio) and log_b >= 0 and math.log10(ratio) <= log_b)
    return HarnackReport("boundary_harnack", sup_val, sup_w, inf_val, inf_w, ratio, log_b, passed,
                         status, sets, consts)


# -- lemma checks --------------------------------------------------------------------------

def l1_contraction_check(u, x: int, r: float, eta: float, C0: float, grid: DomainGrid) -> LemmaCheckReport:
    """int_{B(x,r)} u >= C1 int_{B(x, r + eta/4)} u, C1 from the contraction constant."""
    u = _check_u(u, grid.n)
    name = "l1_contraction"
    if not (eta / 4 * (1 - DIST_RTOL) <= r <= eta * (1 + DIST_RTOL)):
        raise PreconditionError(f"need eta/4 <= r <= eta, got r = {r}, eta = {eta}")
    if not grid.periodic and grid.boundary_distance()[x] < 4 * eta * (1 - DIST_RTOL):
        return _inapplicable(name, "B(x, 4 eta) leaves Omega")
    ys = grid.ball(x, 2 * eta)
    lhs_m = u[ys]
    rhs_m = C0 * grid.ball_sums(u, ys, eta)
    bad = lhs_m < rhs_m * (1 - LEMMA_RTOL)
    if bad.any():
        return _inapplicable(name, "membership u(y) >= C0 int_B(y,eta) u fails",
                             witness=int(ys[np.argmax(bad)]))
    lhs = float(grid.ball_sums(u, [x], r)[0])
    rhs = float(grid.ball_sums(u, [x], r + eta / 4)[0])
    log_c1 = log_contraction_constant(C0, eta, grid.d)
    return _lemma_report(name, lhs, rhs, log_c1, witness=int(x), r=r, eta=eta, C0=C0)


def local_domination_check(u, omega_prime: CompactSet, eps: float, fields: ScenarioFields,
                           profile: KernelProfile, op: DiscreteOperator | None = None) -> LemmaCheckReport:
    """int_{Omega_eps} u >= C_eps int_{Omega'} u with Omega_eps the 3 eps alpha / 4
    erosion of Omega'; the inclusion chain is checked node by node."""
    grid = fields.grid
    u = _check_u(u, grid.n)
    name = "local_domination"
    eps_star = min(profile.r0 / 2, 0.25)
    if not 0 < eps <= eps_star * (1 + 1e-12):
        raise PreconditionError(f"eps = {eps} exceeds min(r0/2, 1/4) = {eps_star}")
    if omega_prime.empty:
        raise PreconditionError("omega' is empty")
    alpha = float(fields.g[omega_prime.mask].min())
    if not alpha > 0:
        raise PreconditionError("g must be bounded below by alpha > 0 on omega'")
    Oeps = erode(omega_prime, 0.75 * eps * alpha)
    if Oeps.empty:
        raise PreconditionError(f"eps = {eps} too large: the erosion of omega' is empty")
    dist = omega_prime.boundary_distance()
    inner = omega_prime.mask & (dist > eps * alpha)
    outer = omega_prime.mask & (dist > eps * alpha / 2)
    chain_ok = bool(np.all(Oeps.mask[inner]) and np.all(outer[Oeps.mask]))
    kb = KernelBounds.of(profile, fields, op)
    d = grid.d
    log_c = (math.log(kb.m0) + math.log(unit_ball_volume(d))
             + d * math.log(eps * alpha / 4 / (8 * fields.beta)) - math.log(float(fields.b.max())))
    lhs = grid.integral(u, Oeps.mask)
    rhs = grid.integral(u, omega_prime.mask)
    rep = _lemma_report(name, lhs, rhs, log_c, alpha=alpha, eps=eps, inclusion_chain=chain_ok)
    if not chain_ok:
        return LemmaCheckReport(**{**rep.__dict__, "passed": False, "status": "inclusion chain fails"})
    return rep


def pointwise_lower_check(u, omega_dprime: CompactSet, fields: ScenarioFields, profile: KernelProfile,
                          omega_prime: CompactSet | None = None, op: DiscreteOperator | None = None,
                          delta: float | None = None) -> LemmaCheckReport:
    """u(x) >= C int_{B(x,delta)} u on the delta-neighbourhood of omega''.

    delta = min(d/2, r0 alpha) with d the distance from omega'' to the boundary
    of omega' (default Omega); C = min_{B(0, delta/alpha)} J / (beta^d ||b||).
    """
    grid = fields.grid
    u = _check_u(u, grid.n)
    name = "pointwise_lower"
    Op = CompactSet.full(grid) if omega_prime is None else omega_prime
    if omega_dprime.empty:
        raise PreconditionError("omega'' is empty")
    if not omega_dprime.issubset(Op):
        raise PreconditionError("omega'' must lie inside omega'")
    alpha = float(fields.g[Op.mask].min())
    if not alpha > 0:
        raise PreconditionError("g must be bounded below by alpha > 0 on omega'")
    if grid.periodic and omega_prime is None:
        dgap = math.inf
    else:
        dgap = float(Op.boundary_distance()[omega_dprime.mask].min())
    if not dgap > 0:
        raise PreconditionError("omega'' must be compactly inside omega'")
    dmax = min(dgap / 2, profile.r0 * alpha)
    delta = dmax if delta is None else min(float(delta), dmax)
    kb = KernelBounds.of(profile, fields, op)
    log_c = log_membership_constant(kb, fields, delta, alpha)
    pts = dilate(omega_dprime, delta).cells
    ints = grid.ball_sums(u, pts, delta)
    cint = np.exp(log_c) * ints
    margins = u[pts] - cint
    k = int(np.argmin(margins - 0.0))
    scale = max(float(np.abs(u[pts]).max()), float(np.abs(cint).max()), 1e-300)
    margin = float(margins[k])
    return LemmaCheckReport(name, float(u[pts[k]]), float(ints[k]), log_c, margin, scale,
                            bool(margin >= -LEMMA_RTOL * scale), witness=int(pts[k]),
                            details={"delta": delta, "alpha": alpha, "nodes": len(pts)})


def ball_comparability_check(u, sigma: CompactSet, eta: float, C0: float, grid: DomainGrid | None = None,
                             seed: int = 0) -> LemmaCheckReport:
    """Part (i): int_B(x,eta/4) u >= C2^(N+2) int_B(y,eta/4) u over sampled pairs;
    part (ii): int_B(x,eta/4) u >= C2^(N+2)/N int_sigma u."""
    grid = sigma.grid if grid is None else grid
    u = _check_u(u, grid.n)
    name = "ball_comparability"
    if sigma.empty:
        raise PreconditionError("sigma is empty")
    if not grid.periodic and grid.boundary_distance()[sigma.mask].min() < 4 * eta * (1 - DIST_RTOL):
        raise PreconditionError("the 4 eta dilation of sigma leaves Omega")
    ys = dilate(sigma, 2 * eta).cells
    bad = u[ys] < C0 * grid.ball_sums(u, ys, eta) * (1 - LEMMA_RTOL)
    if bad.any():
        return _inapplicable(name, "membership fails", witness=int(ys[np.argmax(bad)]))
    cc = chain_constant(C0, eta, sigma)
    cells = sigma.cells
    bs = grid.ball_sums(u, cells, eta / 4)
    m = len(cells)
    if m <= PAIR_ALL:
        pairs = [(i, j) for i in range(m) for j in range(m)]
        singles = list(range(m))
    else:
        rng = np.random.default_rng(seed)
        pi = rng.integers(0, m, size=PAIR_CAP)
        pj = rng.integers(0, m, size=PAIR_CAP)
        pairs = list(zip(pi.tolist(), pj.tolist()))
        singles = sorted(set(pi.tolist()))
    lhs_p = np.array([bs[i] for i, _ in pairs])
    rhs_p = np.array([bs[j] for _, j in pairs])
    cr = np.exp(cc.log_C_pair + np.log(rhs_p))
    mp = lhs_p - cr
    k = int(np.argmin(mp))
    sc = max(float(lhs_p.max()), float(cr.max()), 1e-300)
    part1 = LemmaCheckReport(name + "_i", float(lhs_p[k]), float(rhs_p[k]), cc.log_C_pair, float(mp[k]), sc,
                             bool(mp[k] >= -LEMMA_RTOL * sc), witness=int(cells[pairs[k][0]]),
                             details={"pairs": len(pairs), "N": cc.N})
    total = grid.integral(u, sigma.mask)
    lhs_s = bs[singles]
    cs = math.exp(cc.log_C_sum + math.log(total)) if total > 0 else 0.0
    ms = lhs_s - cs
    k2 = int(np.argmin(ms))
    sc2 = max(float(lhs_s.max()), cs, 1e-300)
    part2 = LemmaCheckReport(name + "_ii", float(lhs_s[k2]), float(total), cc.log_C_sum, float(ms[k2]), sc2,
                             bool(ms[k2] >= -LEMMA_RTOL * sc2), witness=int(cells[singles[k2]]),
                             details={"points": len(singles), "N": cc.N})
    worst = part1 if part1.margin / part1.scale <= part2.margin / part2.scale else part2
    return LemmaCheckReport(name, worst.lhs, worst.rhs, worst.log_constant, worst.margin, worst.scale,
                            bool(part1.passed and part2.passed), witness=worst.witness,
                            parts=(part1, part2), details={"N": cc.N})


# -- super-median functions ---------------------------------------------------------------

def supermedian_ratio(u, omega: CompactSet, eta: float, fields: ScenarioFields, op: DiscreteOperator,
                      eps: float = 0.25) -> HarnackReport:
    """Ratio of v = K u / b between omega and omega' cap omega for u with L u <= 0.

    Omega(omega) is the d_omega-neighbourhood of omega, d_omega its distance to
    the boundary of Omega.
    """
    grid = fields.grid
    u = _check_u(u, grid.n)
    if np.any(u < 0):
        raise NotSupermedianError("u must be nonnegative", witness=int(np.argmin(u)), violation=float(u.min()))
    if omega.empty:
        raise PreconditionError("omega is empty")
    op = op.with_b(fields.b)
    Lu = apply_L(op, u)
    tol = SUPERMEDIAN_RTOL * float(np.abs(u).max())
    if Lu.max() > tol:
        k = int(np.argmax(Lu))
        raise NotSupermedianError(f"L u = {Lu[k]:.3e} > {tol:.3e} at node {k}", witness=k,
                                  violation=float(Lu[k]))
    if grid.periodic:
        d_omega = fields.beta
    else:
        d_omega = float(grid.boundary_distance()[omega.mask].min())
        if not d_omega > 0:
            raise PreconditionError("omega must be compactly inside Omega")
    v = op.matvec(u) / fields.b
    D = dilate(omega, d_omega) & level_set(fields, eta, "above")
    wprime = erode(D, 0.75 * eps * eta / math.sqrt(grid.d))
    target = wprime & omega
    sets = {"omega": omega.describe(), "Omega(omega)": f"d_omega={d_omega:.6g}",
            "omega_prime": wprime.describe(), "inf_set": target.describe()}
    sup_val, sup_w = _extreme(v, omega.mask, np.argmax)
    if target.empty:
        return HarnackReport("supermedian_ratio", sup_val, sup_w, math.nan, None, math.nan,
                             status="vacuous: inf-set empty", sets_used=sets)
    inf_val, inf_w = _extreme(v, target.mask, np.argmin)
    ratio = sup_val / inf_val if inf_val > 0 else math.inf
    return HarnackReport("supermedian_ratio", sup_val, sup_w, inf_val, inf_w, ratio,
                         status="no-bound", sets_used=sets,
                         constants={"max_Lu": float(Lu.max()), "tolerance": tol})


# -- the discrete Laplacian counterexample ----------------------------------------------------

@dataclass(frozen=True)
class CounterexampleRow:
    half_width: float
    residual_inf: float
    lift: float
    sup_val: float
    inf_val: float
    ratio: float
    control_ratio: float
    h2_lower_ok: bool


def dirac_counterexample(half_widths, n_nodes: int = 4096, omega_half: float = 0.1,
                         center: float = 2 * math.pi):
    """Harnack failure for J -> (delta_c + delta_-c)/2 on the periodic cell [0, 4 pi).

    For each half-width w the averaging kernel is a pair of boxes of
    half-width w at +-c.  u* = 1 + cos x solves the limit equation; the
    nonnegative near-solution u* + ||L_w u*|| has the same residual (rows of K
    sum to one) and its sup over the cell divided by its inf over
    [pi - omega_half, pi + omega_half] grows without bound as w -> 0.  The
    control column is the eigenfunction ratio for the conforming box kernel.
    """
    from .eigen import power_iterate
    from .operator import validate_hypotheses

    ws = [float(w) for w in half_widths]
    if any(b >= a for a, b in zip(ws, ws[1:])):
        raise ValueError("half-widths must be strictly decreasing")
    L = 4 * math.pi
    grid = DomainGrid(((0.0, L),), L / n_nodes, periodic=True)
    ones = np.ones(grid.n)
    fields = ScenarioFields(grid, ones, ones, 1.0)
    x = grid.points[:, 0]
    ustar = 1.0 + np.cos(x)
    near_pi = np.abs(x - math.pi) <= omega_half * (1 + DIST_RTOL)
    box = KernelProfile.box(1)
    cop = assemble_operator(box, fields)
    cpair = power_iterate(cop.normalized())
    control = float(cpair.phi.max() / cpair.phi[near_pi].min())
    rows = []
    for w in ws:
        prof = KernelProfile.two_spike(w, center)
        op = assemble_operator(prof, fields)
        res = float(np.abs(apply_L(op, ustar)).max())
        uw = ustar + res
        sup_val = float(uw.max())
        inf_val = float(uw[near_pi].min())
        h2 = validate_hypotheses(prof, fields)["H2_lower"].passed
        rows.append(CounterexampleRow(w, res, res, sup_val, inf_val, sup_val / inf_val, control, h2))
    return tuple(rows)
