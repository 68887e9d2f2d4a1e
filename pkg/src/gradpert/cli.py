"""``kp <command> --config <path> [--out <dir>] [--threads N] [--seed N]``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 numerical
non-convergence or divergence, 3 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import acceptance
from .bounds import control_to_F, greedy_partition, verify_bounds
from .conditions import (estimate_class_P, kato_class_indicator, kato_functional, split_bound,
                         to_class_N)
from .config import COMMANDS, ExperimentConfig, load_config
from .errors import (BoundViolation, ConfigError, DivergenceDetected, EtaOutOfRange, JumpTooLarge,
                     NumericalNonConvergence)
from .inequalities import (ScanGrid, factor_inequality_check, scan_3p_hat, scan_3p_plain,
                           scan_envelope, scan_gradient_bound, scan_php)
from .kernel import envelope, hat_factor
from .report import Report, Table
from .series import series_sum
from .table import get_table

__all__ = ["main", "run_command", "cmd_kernel", "cmd_series", "cmd_conditions", "cmd_partition",
           "cmd_scan", "cmd_verify"]

log = logging.getLogger("gradpert")

_SCAN_FUNCS = {"gradient": scan_gradient_bound, "3p_hat": scan_3p_hat, "3p_plain": scan_3p_plain,
               "php": scan_php, "envelope": scan_envelope}


def cmd_kernel(cfg: ExperimentConfig) -> Report:
    p = cfg.kernel
    if p.dim != 1:
        raise ConfigError("kp kernel tabulates the one-dimensional kernel")
    tab = get_table(p)
    quantities = cfg.option("quantities")
    table = Table(("t", "x") + tuple(quantities))
    y = np.asarray(cfg.samples.y, dtype=float)
    ok = True
    for t in cfg.samples.times:
        cols = {"density": tab.density(t, y), "gradient": tab.gradient(t, y),
                "envelope": envelope(p, t, y), "hat": hat_factor(p, t) * tab.density(t, y)}
        ok &= bool(np.all(np.isfinite(cols["density"])) and np.all(cols["density"] > 0))
        for i, x in enumerate(y):
            table.add(t, x, *(float(np.asarray(cols[q])[i]) for q in quantities))
    return Report("kernel", cfg.echo(), {"kernel": table}, {"density_positive_finite": ok})


def cmd_series(cfg: ExperimentConfig) -> Report:
    sm, p = cfg.samples, cfg.kernel
    drift = cfg.drift_field()
    N = cfg.option("order")
    tab = get_table(p)
    terms = Table(("x", "y", "n", "term", "partial_sum"))
    diag = Table(("x", "tail_ratio", "tail_estimate", "converged"))
    pt, base, pts = [], [], []
    y = np.asarray(sm.y, dtype=float)
    for x in sm.x:
        # sustained growth raises DivergenceDetected inside the solver
        res = series_sum(N, sm.s, x, sm.t, y, drift, p, cfg.grid)
        for n, (term, part) in enumerate(zip(res.terms, res.partial_sums)):
            for yi, a, b in zip(y, np.atleast_1d(term), np.atleast_1d(part)):
                terms.add(x, yi, n, float(a), float(b))
        diag.add(x, res.tail_ratio, res.tail_estimate, res.converged)
        pt += list(np.atleast_1d(res.value))
        base += list(np.atleast_1d(tab.density(sm.t - sm.s, y - x)))
        pts += [(x, yi) for yi in y]
    verdicts = {"finite": bool(np.all(np.isfinite(pt)))}
    results = {}
    ctl = cfg.control
    if cfg.option("check_bounds") and ctl.eta is not None:
        mode = cfg.option("bound_mode")
        if mode == "P-class":
            q = ctl.form().Q(sm.s, sm.t)
        else:
            q = ctl.pair().Q(sm.s, sm.t)
        try:
            v = verify_bounds(np.array(pt), np.array(base), ctl.eta, float(q), mode, tol=cfg.grid.tol, points=pts)
            verdicts["bounds"] = True
            results.update(lower_factor=v.lower, upper_factor=v.upper)
        except BoundViolation as exc:
            verdicts["bounds"] = False
            results["bound_violation"] = exc.worst
    return Report("series", cfg.echo(), {"terms": terms, "diagnostics": diag}, verdicts, results)


def cmd_conditions(cfg: ExperimentConfig) -> Report:
    sm, p = cfg.samples, cfg.kernel
    drift = cfg.drift_field()
    pairs = [(x, y) for x in sm.x for y in sm.y]
    kato = Table(("s", "x", "t", "y", "kato"))
    vals = []
    for x, y in pairs:
        k = kato_functional(sm.s, x, sm.t, y, drift, p)
        vals.append(k)
        kato.add(sm.s, x, sm.t, y, k)
    tables = {"kato": kato}
    verdicts, results = {}, {"kato_max": max(vals)}
    ctl = cfg.control
    if ctl.eta is not None and ctl.eta > 0:
        cp = estimate_class_P(drift, p, ctl.eta)
        results.update(class_P_h=cp.h, class_P_found=cp.found, class_P_capped=cp.capped,
                       class_P_functional=cp.functional_at_h)
        verdicts["class_P_found"] = bool(cp.found)
        if cp.found and not cp.capped:
            pair = to_class_N(ctl.eta, cp.h)
            results["class_N_rate"] = pair.q_form.rate
            bound = (pair.eta + pair.Q(sm.s, sm.t)) * (1.0 + 5.0 * cfg.grid.tol)
            verdicts["class_N_holds"] = bool(max(vals) <= bound)
    if cfg.option("split_pairs"):
        split = Table(("s", "x", "t", "y", "split", "kato", "ratio"))
        for x, y in pairs:
            sb = split_bound(sm.s, x, sm.t, y, drift, p)
            split.add(sm.s, x, sm.t, y, sb.value, sb.kato, sb.ratio)
        tables["split"] = split
    gammas = cfg.option("indicator_gammas")
    if gammas:
        ind = Table(("gamma", "radius", "value"))
        for g in gammas:
            r = kato_class_indicator(drift, g)
            for rad, v in zip(r.radii, r.values):
                ind.add(g, rad, v)
            results[f"indicator_decays_gamma_{g!r}"] = r.decays
        tables["indicator"] = ind
    return Report("conditions", cfg.echo(), tables, verdicts, results)


def cmd_partition(cfg: ExperimentConfig) -> Report:
    start, end, theta = cfg.option("start"), cfg.option("end"), cfg.option("theta")
    F = control_to_F(cfg.control.pair(), start)
    table = Table(("index", "point", "variation"))
    try:
        r = greedy_partition(F, start, end, theta)
    except JumpTooLarge as exc:
        return Report("partition", cfg.echo(), {}, {"partition": False}, {"error": str(exc)})
    for i, pt in enumerate(r.points):
        table.add(i, pt, r.jumps[i - 1] if i else 0.0)
    return Report("partition", cfg.echo(), {"partition": table}, {"partition": True},
                  {"m": r.m, "k": r.k, "theta": r.theta})


def cmd_scan(cfg: ExperimentConfig) -> Report:
    o = dict(cfg.options)
    grid = ScanGrid((o["t_min"], o["t_max"]), (o["x_min"], o["x_max"]), tuple(o["levels"]),
                    tuple(o["pair_levels"]))
    table = Table(("scan", "level", "sup_ratio", "inf_ratio"))
    verdicts, results = {}, {}
    for name in o["scans"]:
        rep = _SCAN_FUNCS[name](cfg.kernel, grid)
        for i, v in enumerate(rep.refinement_history):
            inf = rep.inf_history[i] if rep.inf_history else float("nan")
            table.add(name, i, v, inf)
        verdicts[f"{name}_stable"] = bool(rep.stable and np.isfinite(rep.sup_ratio))
        results[name] = {k: v for k, v in rep.as_dict().items() if k != "details"}
    holds, worst = factor_inequality_check(cfg.kernel, grid)
    verdicts["factor_inequality"] = holds
    results["factor_inequality_worst"] = worst
    return Report("scan", cfg.echo(), {"scan": table}, verdicts, results)


def cmd_verify(cfg: ExperimentConfig) -> Report:
    table = Table(("criterion", "name", "passed", "detail"))
    verdicts, timing = {}, {}
    t0 = time.perf_counter()
    acceptance.warm_tables()
    timing["table_warmup"] = time.perf_counter() - t0
    for r in acceptance.run_criteria(cfg.option("criteria")):
        log.info(r.line())
        print(r.line(), file=sys.stderr)
        table.add(r.number, r.name, r.passed, r.detail)
        verdicts[f"criterion_{r.number}"] = r.passed
        timing[f"criterion_{r.number}"] = {"runtime": r.runtime, "budget": r.budget}
    rep = Report("verify", cfg.echo(), {"criteria": table}, verdicts)
    rep.timing.update(timing)
    return rep


_COMMAND_FUNCS = {"kernel": cmd_kernel, "series": cmd_series, "conditions": cmd_conditions,
                  "partition": cmd_partition, "scan": cmd_scan, "verify": cmd_verify}


def run_command(cfg: ExperimentConfig) -> Report:
    t0 = time.perf_counter()
    rep = _COMMAND_FUNCS[cfg.command](cfg)
    rep.timing["total"] = time.perf_counter() - t0
    return rep


def _setup_logging():
    level = os.environ.get("KP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"KP_LOG must be one of error, info, debug; got {level!r}")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kp", description="Drift-perturbed stable kernels: numerics and checks.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="kp_out")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                    help="worker cap (recorded; the engines run single-threaded)")
    ap.add_argument("--seed", type=int, default=None, help="reserved, unused")
    args = ap.parse_args(argv)
    try:
        _setup_logging()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, args.command)
        rep = run_command(cfg)
    except (ConfigError, EtaOutOfRange) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (NumericalNonConvergence, DivergenceDetected) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    rep.timing.update(threads=args.threads, seed=args.seed)
    paths = rep.write(args.out, cfg.output_prefix)
    print(rep.summary(), end="")
    log.info("wrote %s", ", ".join(sorted(paths.values())))
    return 0 if rep.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
