"""``nlharnack validate|solve|verify|sweep|counterexample <config>``.

Exit codes: 0 success, 1 a check failed, 2 the configuration could not be
parsed, 3 a precondition of an operation does not hold.
"""
from __future__ import annotations

import argparse
import itertools
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io
from .eigen import (ConvergenceError, ExhaustionSchedule, MollifierSchedule, UnboundedScenario,
                    power_iterate, solve_bounded, solve_exhaustion)
from .errors import ConfigError, NLHarnackError, NoChainError, NotSupermedianError, PreconditionError
from .geometry import CompactSet, ConeSpec, dilate, erode, level_set
from .grid import DomainGrid
from .harnack import (HarnackReport, LemmaCheckReport, ball_comparability_check, boundary_harnack,
                      dirac_counterexample, harnack_ratio, l1_contraction_check, local_domination_check,
                      membership_constant, pointwise_lower_check, supermedian_ratio)
from .operator import assemble_operator, validate_hypotheses
from .scenario import Scenario, build_grid, build_scenario, load_config, with_overrides

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3
VERIFY_HEADER = ("check_name", "scenario_id", "sup", "inf", "ratio", "bound", "margin", "pass", "witnesses")


def log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _threads(arg):
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("NLHARNACK_THREADS")
    return max(1, int(env)) if env else 1


class _Out:
    def __init__(self, sc: Scenario, out_dir, to_stdout):
        ocfg = sc.config.get("output", {})
        d = out_dir or ocfg.get("dir", "out")
        if not os.path.isabs(d) and out_dir is None:
            d = os.path.join(sc.base_dir, d)
        self.dir = d
        self.emit_fields = bool(ocfg.get("emit_fields", True))
        self.emit_plots = bool(ocfg.get("emit_plot_tables", False))
        self.stdout = to_stdout
        self.sid = sc.scenario_id

    def path(self, suffix):
        return os.path.join(self.dir, f"{self.sid}_{suffix}")

    def csv(self, suffix, header, rows, primary=False):
        text = io.csv_text(header, rows)
        io.atomic_write(self.path(suffix), text)
        if primary and self.stdout:
            sys.stdout.write(text)
        return text

    def field(self, suffix, values):
        if self.emit_fields:
            io.write_field(self.path(suffix), values)

    def plot(self, suffix, grid, values):
        if self.emit_plots:
            x, v = io.slice_1d(grid, values)
            io.atomic_write(self.path(suffix), io.plot_table_text(x, v))


# -- validate -------------------------------------------------------------------------

def cmd_validate(sc: Scenario, out: _Out, threads: int) -> int:
    rep = validate_hypotheses(sc.profile, sc.fields)
    rows = [(r.name, r.passed, r.value, r.witness) for r in rep.results]
    out.csv("validate.csv", ("hypothesis", "pass", "value", "witness"), rows, primary=True)
    for r in rep.results:
        log(f"{r.name:10s} {'pass' if r.passed else 'FAIL'}  {r.witness}")
    return EXIT_OK if rep.all_passed else EXIT_FAIL


# -- solve ------------------------------------------------------------------------------

def _solver_opts(sc):
    s = sc.config.get("solver", {})
    return float(s.get("tol", 1e-12)), int(s.get("max_iter", 100_000)), s


def solve_scenario(sc: Scenario):
    """Returns (pair, op, fields with b = lambda a, extra dict)."""
    tol, max_iter, s = _solver_opts(sc)
    extra = {}
    if s.get("mollifier_widths"):
        res = solve_bounded(sc, MollifierSchedule(tuple(s["mollifier_widths"]),
                                                  bool(s.get("quadrature_refine", False))),
                            tol=tol, max_iter=max_iter)
        extra["bounded"] = res
        prof = res.profiles[-1]
        fields = sc.fields
        if res.pair.phi.shape != (fields.grid.n,):
            raise PreconditionError("quadrature refinement changes the grid; verify on the base grid is not defined")
        op = assemble_operator(prof, fields).normalized()
        pair = res.pair
        extra["profile"] = prof
    else:
        op = assemble_operator(sc.profile, sc.fields).normalized()
        pair = power_iterate(op, tol=tol, max_iter=max_iter)
        extra["profile"] = sc.profile
    fields_u = sc.fields.with_b(pair.lam * op.a_vec)
    return pair, op.with_b(fields_u.b), fields_u, extra


def cmd_solve(sc: Scenario, out: _Out, threads: int) -> int:
    tol, max_iter, s = _solver_opts(sc)
    if s.get("exhaustion_boxes"):
        return _solve_exhaustion(sc, out, tol, max_iter, s)
    pair, op, _, extra = solve_scenario(sc)
    rows = [("lambda", pair.lam), ("residual_inf", pair.residual_inf), ("iterations", pair.iterations),
            ("reducible", pair.reducible), ("normalization", pair.normalization)]
    out.field("phi.txt", pair.phi)
    out.plot("phi_plot.txt", sc.fields.grid, pair.phi)
    if "bounded" in extra:
        res = extra["bounded"]
        out.csv("mollifier.csv", ("width", "h", "lambda", "residual", "iterations", "sup_diff", "C_J"),
                res.rows())
        rows += [("max_sup_diff", res.max_sup_diff), ("converged", res.converged),
                 ("C_J_stable", res.c_stable)]
    out.csv("solve.csv", ("quantity", "value"), rows, primary=True)
    log(f"{sc.scenario_id}: lambda = {pair.lam!r}, residual = {pair.residual_inf:.3e}, "
        f"iterations = {pair.iterations}")
    if "bounded" in extra and not extra["bounded"].converged:
        log("mollification diagnostics diverge")
        return EXIT_FAIL
    return EXIT_OK


def _solve_exhaustion(sc, out, tol, max_iter, s):
    dom = sc.config["domain"]
    grids = []
    for boxes in s["exhaustion_boxes"]:
        grids.append(build_grid({**dom, "boxes": boxes}))
    if "anchor" not in s or "eta1" not in s:
        raise ConfigError("exhaustion needs solver.anchor and solver.eta1")
    fl = sc.config["fields"]
    g = fl["g"]
    if isinstance(g, str) and g.startswith("file:"):
        raise ConfigError("exhaustion needs g as const: or expr:")
    unb = UnboundedScenario(sc.profile, g, float(fl["beta"]), float(fl.get("vanish_threshold", 0.0)),
                            float(fl.get("p_exponent", 2.0)))
    sched = ExhaustionSchedule(tuple(grids), tuple(np.atleast_1d(s["anchor"])), float(s["eta1"]))
    res = solve_exhaustion(unb, sched, tol=tol, max_iter=max_iter, stop_tol=float(s.get("stop_tol", 0.0)))
    for k, phi in enumerate(res.phis):
        out.field(f"phi_stage{k}.txt", phi)
        out.plot(f"phi_stage{k}_plot.txt", grids[k], phi)
    out.csv("exhaustion.csv", ("stage", "sup_diff", "lambda", "residual"), res.rows(), primary=True)
    log(f"{sc.scenario_id}: {len(res.stages)} stages, a monotone = {res.a_monotone}, a <= 1 = {res.a_bounded}")
    return EXIT_OK if (res.a_monotone and res.a_bounded) else EXIT_FAIL


# -- verify --------------------------------------------------------------------------------

def _set(spec, fields, default):
    if spec is None:
        return default
    try:
        return CompactSet.from_spec(spec, fields)
    except ValueError as e:
        raise ConfigError(f"verify: {e}") from None


def _row(name, sid, rep):
    if isinstance(rep, HarnackReport):
        bound = rep.bound
        wit = f"sup@{rep.sup_witness};inf@{rep.inf_witness}"
        if rep.log10_bound is not None:
            wit += f";log10_bound={rep.log10_bound!r}"
        wit += f";status={rep.status}"
        p = "inapplicable" if rep.passed is None else rep.passed
        return (name, sid, rep.sup_val, rep.inf_val, rep.ratio, bound, rep.margin, p, wit)
    wit = f"node@{rep.witness};log_constant={rep.log_constant!r};status={rep.status}"
    for part in rep.parts:
        wit += f";{part.name}={'pass' if part.passed else 'fail'}"
    ratio = rep.lhs / rep.rhs if rep.rhs and rep.rhs == rep.rhs else math.nan
    p = "inapplicable" if rep.passed is None else rep.passed
    return (name, sid, rep.lhs, rep.rhs, ratio, rep.constant, rep.margin, p, wit)


def run_checks(sc: Scenario, u, op, fields_u, vcfg: dict, profile=None, threads: int = 1):
    """Run the configured checks; returns (rows, exit code)."""
    profile = sc.profile if profile is None else profile
    grid = fields_u.grid
    checks = vcfg.get("checks", ["harnack_ratio"])
    eta = float(vcfg.get("eta", 0.1))
    eps = vcfg.get("eps")
    eps = None if eps is None else float(eps)
    omega = _set(vcfg.get("omega"), fields_u, CompactSet.full(grid))
    cone = vcfg.get("cone")
    cone = ConeSpec(float(cone["theta"]), float(cone["height"])) if cone else None
    C0_cfg = vcfg.get("C0")

    def c0_for(region_mask, radius):
        if C0_cfg is not None:
            return float(C0_cfg)
        alpha = float(fields_u.g[region_mask].min())
        if not alpha > 0:
            raise PreconditionError("g vanishes where the membership constant is needed")
        return membership_constant(profile, fields_u, radius, alpha, op)

    def one(name):
        if name == "harnack_ratio":
            return harnack_ratio(u, omega, eta, fields_u, profile, op, eps=eps,
                                 delta=vcfg.get("delta"), cone=cone)
        if name == "boundary_harnack":
            return boundary_harnack(u, fields_u, profile, op, cone=cone, bound=vcfg.get("bound"), eps=eps)
        if name == "l1_contraction":
            if "x" in vcfg:
                x = grid.nearest_node(np.atleast_1d(np.asarray(vcfg["x"], dtype=float)))
            else:
                c = grid.points[omega.mask].mean(axis=0)
                x = grid.nearest_node(c)
            r = float(vcfg.get("r", eta / 2))
            region = dilate(CompactSet.from_nodes(grid, [x]), 3 * eta).mask
            return l1_contraction_check(u, x, r, eta, c0_for(region, eta), grid)
        if name == "local_domination":
            default = dilate(omega, fields_u.beta * profile.R0) & level_set(fields_u, eta, "above")
            op_set = _set(vcfg.get("omega_prime"), fields_u, default)
            e = eps if eps is not None else min(profile.r0 / 2, 0.25)
            return local_domination_check(u, op_set, e, fields_u, profile, op)
        if name == "pointwise_lower":
            Wp = _set(vcfg.get("omega_prime"), fields_u, level_set(fields_u, eta, "above"))
            dflt = erode(Wp, 2 * eta) & omega
            Wpp = _set(vcfg.get("omega_dprime"), fields_u, dflt)
            Wp_arg = None if Wp.mask.all() else Wp
            return pointwise_lower_check(u, Wpp, fields_u, profile, omega_prime=Wp_arg, op=op)
        if name == "ball_comparability":
            full = CompactSet.full(grid)
            dflt = erode(full, 4 * eta + grid.h) & omega
            sigma = _set(vcfg.get("sigma"), fields_u, dflt)
            region = dilate(sigma, 3 * eta).mask
            return ball_comparability_check(u, sigma, eta, c0_for(region, eta), grid)
        if name == "supermedian_ratio":
            return supermedian_ratio(u, omega, eta, fields_u, op, eps=eps if eps is not None else 0.25)
        raise ConfigError(f"unknown check {name!r}")

    def guarded(name):
        try:
            return name, one(name), None
        except (PreconditionError, NoChainError, NotSupermedianError) as e:
            return name, None, e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(guarded, checks))
    else:
        results = [guarded(c) for c in checks]
    rows, code = [], EXIT_OK
    for name, rep, err in results:
        if err is not None:
            rows.append((name, sc.scenario_id, None, None, None, None, None, "error",
                         f"precondition: {err}"))
            code = EXIT_PRECONDITION
            continue
        rows.append(_row(name, sc.scenario_id, rep))
        if rep.passed is False and code == EXIT_OK:
            code = EXIT_FAIL
    return rows, code


def _solution_for_verify(sc):
    vcfg = sc.config.get("verify", {})
    if "field" in vcfg:
        path = vcfg["field"] if os.path.isabs(vcfg["field"]) else os.path.join(sc.base_dir, vcfg["field"])
        u = io.read_field(path)
        if len(u) != sc.fields.grid.n:
            raise ConfigError(f"verify.field has {len(u)} values, grid has {sc.fields.grid.n} nodes")
        op = assemble_operator(sc.profile, sc.fields)
        return u, op, sc.fields, sc.profile
    pair, op, fields_u, extra = solve_scenario(sc)
    return pair.phi, op, fields_u, extra["profile"]


def cmd_verify(sc: Scenario, out: _Out, threads: int) -> int:
    u, op, fields_u, prof = _solution_for_verify(sc)
    rows, code = run_checks(sc, u, op, fields_u, sc.config.get("verify", {}), prof, threads)
    out.csv("verify.csv", VERIFY_HEADER, rows, primary=True)
    for r in rows:
        log(f"{r[0]:20s} {io.fmt(r[7])}" + (f"  ({r[8]})" if r[7] == "error" else ""))
    return code


# -- sweep ------------------------------------------------------------------------------------

def cmd_sweep(sc: Scenario, out: _Out, threads: int) -> int:
    grid_cfg = sc.config.get("sweep", {}).get("grid")
    if not grid_cfg:
        raise ConfigError("sweep needs a sweep.grid section")
    keys = sorted(grid_cfg)
    points = list(itertools.product(*[list(grid_cfg[k]) for k in keys]))

    def run_point(k):
        params = dict(zip(keys, points[k]))
        cfg = with_overrides(sc.config, **params)
        psc = build_scenario(cfg, sc.base_dir)
        try:
            pair, op, fields_u, extra = solve_scenario(psc)
            rows, code = run_checks(psc, pair.phi, op, fields_u, cfg.get("verify", {}), extra["profile"])
        except (PreconditionError, NoChainError) as e:
            return k, params, None, [], EXIT_PRECONDITION, str(e)
        return k, params, pair, rows, code, ""

    with ThreadPoolExecutor(max_workers=threads) as ex:
        results = list(ex.map(run_point, range(len(points))))
    header = ("scenario_id", "point", *keys, "quantity", "value")
    all_rows, code = [], EXIT_OK
    for k, params, pair, rows, c, err in results:
        vals = [params[key] for key in keys]
        prow = []
        if pair is None:
            prow.append((sc.scenario_id, k, *vals, "error", err))
        else:
            prow.append((sc.scenario_id, k, *vals, "lambda", pair.lam))
            prow.append((sc.scenario_id, k, *vals, "residual_inf", pair.residual_inf))
            prow.append((sc.scenario_id, k, *vals, "sup_inf_ratio", float(pair.phi.max() / pair.phi.min())))
            for r in rows:
                for q, idx in (("ratio", 4), ("bound", 5), ("margin", 6), ("pass", 7)):
                    prow.append((sc.scenario_id, k, *vals, f"{r[0]}.{q}", r[idx]))
        out.csv(f"sweep_point{k}.csv", header, prow)
        all_rows += prow
        code = max(code, c) if c != EXIT_OK else code
    out.csv("sweep.csv", header, all_rows, primary=True)
    log(f"{sc.scenario_id}: {len(points)} sweep points")
    return code


# -- counterexample ----------------------------------------------------------------------------

def cmd_counterexample(sc: Scenario, out: _Out, threads: int) -> int:
    c = sc.config.get("counterexample", {})
    widths = c.get("half_widths", [0.1, 0.05, 0.025])
    rows = dirac_counterexample(widths, int(c.get("n_nodes", 4096)), float(c.get("omega_half", 0.1)))
    header = ("half_width", "residual_inf", "lift", "sup", "inf", "ratio", "control_ratio", "h2_lower")
    out.csv("counterexample.csv", header,
            [(r.half_width, r.residual_inf, r.lift, r.sup_val, r.inf_val, r.ratio, r.control_ratio,
              r.h2_lower_ok) for r in rows], primary=True)
    ratios = [r.ratio for r in rows]
    res = [r.residual_inf for r in rows]
    ok = all(b > a for a, b in zip(ratios, ratios[1:])) and all(b < a for a, b in zip(res, res[1:]))
    log(f"counterexample ratios: {', '.join(f'{x:.4g}' for x in ratios)}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "verify": cmd_verify,
            "sweep": cmd_sweep, "counterexample": cmd_counterexample}


def run(config_path, command: str, out_dir=None, threads=None, to_stdout: bool = False) -> int:
    try:
        cfg, base = load_config(config_path)
        sc = build_scenario(cfg, base)
    except ConfigError as e:
        log(f"config error: {e}")
        return EXIT_CONFIG
    except (PreconditionError, MemoryError) as e:
        log(f"precondition error: {e}")
        return EXIT_PRECONDITION
    out = _Out(sc, out_dir, to_stdout)
    try:
        return COMMANDS[command](sc, out, _threads(threads))
    except ConfigError as e:
        log(f"config error: {e}")
        return EXIT_CONFIG
    except (PreconditionError, NoChainError, NotSupermedianError, MemoryError) as e:
        log(f"precondition error: {e}")
        return EXIT_PRECONDITION
    except ConvergenceError as e:
        log(f"solver failure: {e}")
        return EXIT_FAIL


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nlharnack", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("config")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--stdout", action="store_true", help="also write the main CSV to stdout")
    args = ap.parse_args(argv)
    return run(args.config, args.command, args.out, args.threads, args.stdout)


if __name__ == "__main__":
    sys.exit(main())
