"""sup/inf ratios of an eigenfunction against the constructive bounds.

The bounds are astronomically large (they are products of chain
constants), so they are carried as log10 values; the interesting output
is that the measured ratios stay below 2 while every check passes.
"""
import numpy as np

from nlharnack import (CompactSet, DomainGrid, KernelProfile, ScenarioFields, assemble_operator,
                       ball_comparability_check, boundary_harnack, erode, exit_rate, harnack_ratio,
                       l1_contraction_check, local_domination_check, pointwise_lower_check, power_iterate)
from nlharnack.harnack import membership_constant


def main():
    prof = KernelProfile.box(1)
    grid = DomainGrid(((0.0, 1.0),), 1 / 1024)
    g = 0.2 + 0.1 * grid.points[:, 0]
    f = ScenarioFields(grid, g, np.ones(grid.n), 0.3)
    f = f.with_b(exit_rate(prof, f))
    op = assemble_operator(prof, f).normalized()
    pair = power_iterate(op)
    fu = f.with_b(pair.lam * op.a_vec)
    op = op.with_b(fu.b)
    u = pair.phi

    omega = CompactSet.from_boxes(grid, [[0.3, 0.7]])
    for rep in (harnack_ratio(u, omega, 0.1, fu, prof, op), boundary_harnack(u, fu, prof, op)):
        print(f"{rep.name:18s} ratio {rep.ratio:.5f}  log10 bound {rep.log10_bound:10.1f}  {rep.status}")

    eta = 0.1
    C0 = membership_constant(prof, fu, eta, float(g.min()), op)
    x = grid.nearest_node(np.array([0.5]))
    full = CompactSet.full(grid)
    lemmas = [
        l1_contraction_check(u, x, eta / 2, eta, C0, grid),
        local_domination_check(u, full, 0.25, fu, prof, op),
        pointwise_lower_check(u, omega, fu, prof, op=op),
        ball_comparability_check(u, erode(full, 4 * eta + grid.h) & omega, eta, C0, grid),
    ]
    for rep in lemmas:
        print(f"{rep.name:18s} lhs/rhs {rep.lhs / rep.rhs:10.4g}  log C {rep.log_constant:10.2f}  "
              f"{'pass' if rep.passed else 'fail'}")

    print("\nmesh refinement of the boundary ratio")
    for h in (1 / 256, 1 / 512, 1 / 1024, 1 / 2048):
        gr = DomainGrid(((0.0, 1.0),), h)
        gg = 0.2 + 0.1 * gr.points[:, 0]
        ff = ScenarioFields(gr, gg, np.ones(gr.n), 0.3)
        ff = ff.with_b(exit_rate(prof, ff))
        oo = assemble_operator(prof, ff).normalized()
        pp = power_iterate(oo)
        print(f"  h = 1/{round(1 / h):<5d} {boundary_harnack(pp.phi, ff).ratio:.5f}")


if __name__ == "__main__":
    main()
