"""Radial dispersal densities J and their box bounds.

Every supported density is radial, J(z) = j(|z|), so a profile is described
by its radial function j on [0, inf).  The box bounds are

    m0 * 1{|z| <= r0}  <=  J(z)  <=  M0 * 1{|z| <= R0}

with R0 = 1 for unmodified kernels (the support radius grows under
mollification).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SHAPES = ("box", "bump", "piecewise_table", "two_spike")


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def ball_volume(radius: float, d: int) -> float:
    return unit_ball_volume(d) * radius ** d


# normalisation of c * (1 - r^2)^2 on the unit ball
_BUMP_MASS = {1: 16.0 / 15.0, 2: math.pi / 3.0}


@dataclass(frozen=True)
class KernelProfile:
    """A radial probability density on R^d (d = 1 or 2).

    Use the classmethod factories; the raw constructor only checks that the
    declared constants are internally consistent.  ``two_spike`` is accepted
    even though it violates the lower box bound.
    """

    shape: str
    d: int
    r0: float
    m0: float
    M0: float
    R0: float = 1.0
    smooth: bool = False
    table: tuple | None = None
    spike_half_width: float | None = None
    spike_center: float | None = None
    _coef: float = field(default=0.0, repr=False)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}")
        if self.d not in (1, 2):
            raise ValueError("only d = 1 or d = 2 is supported")
        if not (0 < self.r0 <= self.R0):
            raise ValueError(f"need 0 < r0 <= R0, got r0={self.r0}, R0={self.R0}")
        if not (0 < self.m0 <= self.M0 < math.inf):
            raise ValueError(f"need 0 < m0 <= M0 < inf, got m0={self.m0}, M0={self.M0}")
        if self.shape == "piecewise_table":
            if self.table is None or len(self.table) < 2:
                raise ValueError("piecewise_table needs at least two breakpoints")
            radii = [p[0] for p in self.table]
            if radii[0] != 0.0 or any(b <= a for a, b in zip(radii, radii[1:])):
                raise ValueError("table radii must start at 0 and increase strictly")
            if any(p[1] < 0 or not math.isfinite(p[1]) for p in self.table):
                raise ValueError("table values must be finite and nonnegative")
        if self.shape == "two_spike":
            if self.d != 1:
                raise ValueError("two_spike is a 1-D kernel")
            if not self.spike_half_width or self.spike_half_width <= 0:
                raise ValueError("two_spike needs spike_half_width > 0")
            if self.spike_center is None or self.spike_center <= self.spike_half_width:
                raise ValueError("two_spike needs spike_center > spike_half_width")

    # -- factories ---------------------------------------------------------

    @classmethod
    def box(cls, d: int = 1) -> "KernelProfile":
        c = 1.0 / unit_ball_volume(d)
        return cls("box", d, r0=1.0, m0=c, M0=c, smooth=False, _coef=c)

    @classmethod
    def bump(cls, d: int = 1, r0: float = 0.5) -> "KernelProfile":
        c = 1.0 / _BUMP_MASS[d]
        m0 = c * (1.0 - r0 * r0) ** 2
        return cls("bump", d, r0=r0, m0=m0, M0=c, smooth=True, _coef=c)

    @classmethod
    def from_table(cls, d, breakpoints, r0=None, normalize=False, smooth=None):
        """Piecewise-linear radial profile through ``(radius, value)`` pairs.

        Values vanish beyond the last radius.  With ``normalize`` the values
        are rescaled to unit mass.
        """
        pts = [(float(r), float(v)) for r, v in breakpoints]
        if normalize:
            m = _table_mass(pts, d)
            pts = [(r, v / m) for r, v in pts]
        radii = np.array([p[0] for p in pts])
        vals = np.array([p[1] for p in pts])
        R0 = float(radii[-1])
        if vals[0] <= 0:
            raise ValueError("table must be positive at the origin")
        if r0 is None:
            # largest breakpoint radius up to which the profile stays positive
            k = 0
            while k + 1 < len(vals) and vals[k + 1] > 0:
                k += 1
            r0 = float(radii[k]) if k > 0 else 0.5 * float(radii[1])
        tmp = cls("piecewise_table", d, r0=r0, m0=1e-300, M0=float(vals.max()),
                  R0=R0, smooth=True, table=tuple(pts))
        m0 = tmp.min_on_ball(r0)
        if smooth is None:
            smooth = vals[-1] == 0.0
        return cls("piecewise_table", d, r0=r0, m0=m0, M0=float(vals.max()), R0=R0,
                   smooth=bool(smooth), table=tuple(pts))

    @classmethod
    def two_spike(cls, half_width: float, center: float = 2 * math.pi) -> "KernelProfile":
        """J = (rho_w(. - c) + rho_w(. + c)) / 2 with rho_w a box of half-width w.

        As w -> 0 this tends to (delta_c + delta_{-c}) / 2, the averaging
        kernel of a discrete Laplacian.  The declared r0/m0 are nominal; the
        lower box bound fails at the origin by design.
        """
        h = 1.0 / (4.0 * half_width)
        return cls("two_spike", 1, r0=1.0, m0=h, M0=h, R0=center + half_width,
                   smooth=False, spike_half_width=half_width, spike_center=center, _coef=h)

    # -- evaluation --------------------------------------------------------

    def radial(self, r) -> np.ndarray:
        """Evaluate the radial profile at distances ``r >= 0``."""
        r = np.asarray(r, dtype=float)
        if self.shape == "box":
            return np.where(r <= 1.0, self._coef, 0.0)
        if self.shape == "bump":
            s = np.clip(1.0 - r * r, 0.0, None)
            return self._coef * s * s
        if self.shape == "piecewise_table":
            radii = np.array([p[0] for p in self.table])
            vals = np.array([p[1] for p in self.table])
            out = np.interp(r, radii, vals)
            return np.where(r <= radii[-1], out, 0.0)
        c, w = self.spike_center, self.spike_half_width
        return np.where(np.abs(r - c) <= w, self._coef, 0.0)

    def __call__(self, z) -> np.ndarray:
        """Evaluate J at points ``z`` of shape (..., d) (or (...,) when d = 1)."""
        z = np.asarray(z, dtype=float)
        if self.d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
            return self.radial(np.abs(z))
        return self.radial(np.linalg.norm(z, axis=-1))

    def breakpoints(self) -> np.ndarray:
        if self.shape == "box":
            return np.array([0.0, 1.0])
        if self.shape == "bump":
            return np.array([0.0, 1.0])
        if self.shape == "piecewise_table":
            return np.array([p[0] for p in self.table])
        c, w = self.spike_center, self.spike_half_width
        return np.array([0.0, c - w, c + w])

    def min_on_ball(self, radius: float) -> float:
        """min of J over the closed ball B(0, radius)."""
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        if self.shape == "box":
            return float(self._coef) if radius <= 1.0 else 0.0
        if self.shape == "bump":
            return float(self.radial(radius))
        bp = self.breakpoints()
        rs = np.concatenate([np.linspace(0.0, radius, 2049), bp[bp <= radius], [radius]])
        return float(self.radial(rs).min())

    def sup_norm(self) -> float:
        if self.shape in ("box", "two_spike"):
            return float(self._coef)
        if self.shape == "bump":
            return float(self._coef)
        return float(max(p[1] for p in self.table))

    def mass(self) -> float:
        """Integral of J over R^d, computed in closed form per shape."""
        if self.shape == "box":
            return self._coef * unit_ball_volume(self.d)
        if self.shape == "bump":
            return self._coef * _BUMP_MASS[self.d]
        if self.shape == "piecewise_table":
            return _table_mass(self.table, self.d)
        return 2.0 * self._coef * 2.0 * self.spike_half_width

    @property
    def conforming(self) -> bool:
        return self.shape != "two_spike"


def _table_mass(pts, d) -> float:
    total = 0.0
    for (ra, fa), (rb, fb) in zip(pts, pts[1:]):
        L = rb - ra
        if d == 1:
            total += 0.5 * L * (fa + fb)
        else:
            # exact for (linear profile) * r
            total += L / 6.0 * (fa * (2 * ra + rb) + fb * (ra + 2 * rb))
    return 2.0 * total if d == 1 else 2.0 * math.pi * total
