"""Harnack failure when J concentrates on two points.

Box pairs of half-width w at +-2 pi approximate (delta_c + delta_-c)/2.
u = 1 + cos x solves the limit problem and touches zero at pi, so after
a lift by the residual its sup/inf ratio grows as w shrinks.  The box
kernel control keeps a ratio of 1.
"""
from nlharnack import dirac_counterexample


def main():
    rows = dirac_counterexample([0.1, 0.05, 0.025, 0.0125])
    print(f"{'w':>8s} {'ratio':>12s} {'|Lu|_inf':>12s} {'control':>10s}")
    for r in rows:
        print(f"{r.half_width:8.4f} {r.ratio:12.4g} {r.residual_inf:12.3e} {r.control_ratio:10.6f}")


if __name__ == "__main__":
    main()
