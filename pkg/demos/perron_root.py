"""Principal eigenpair of the lattice operator with b = a.

The exit rate a is the column sum of K, so the Perron root of diag(1/a) K
is 1 up to rounding for any dispersal field g.  Constant g gives a
constant eigenfunction; varying g tilts it toward small radii.
"""
import numpy as np

from nlharnack import DomainGrid, KernelProfile, ScenarioFields, assemble_operator, exit_rate, power_iterate


def solve(profile, grid, g):
    f = ScenarioFields(grid, g, np.ones(grid.n), float(g.max()))
    f = f.with_b(exit_rate(profile, f))
    return power_iterate(assemble_operator(profile, f).normalized())


def main():
    grid = DomainGrid(((0.0, 1.0),), 1 / 512)
    x = grid.points[:, 0]
    fields = {
        "g = 0.3": np.full(grid.n, 0.3),
        "g = 0.2 + 0.1 x": 0.2 + 0.1 * x,
        "g = 0.3 + 0.1 cos 6x": 0.3 + 0.1 * np.cos(6 * x),
    }
    print(f"{'kernel':8s} {'field':22s} {'lambda - 1':>12s} {'max/min phi':>12s} {'iters':>6s}")
    for kname, prof in (("box", KernelProfile.box(1)), ("bump", KernelProfile.bump(1, 0.5))):
        for fname, g in fields.items():
            pair = solve(prof, grid, g)
            print(f"{kname:8s} {fname:22s} {pair.lam - 1:12.2e} {pair.phi.max() / pair.phi.min():12.6f} "
                  f"{pair.iterations:6d}")

    grid2 = DomainGrid(((0.0, 1.0), (0.0, 1.0)), 1 / 32)
    p = grid2.points
    pair = solve(KernelProfile.box(2), grid2, 1.5 + 0.2 * p[:, 0] + 0.1 * p[:, 1])
    print(f"\n2-D box, 32 x 32: lambda - 1 = {pair.lam - 1:.2e}, max/min phi = "
          f"{pair.phi.max() / pair.phi.min():.4f}")


if __name__ == "__main__":
    main()
