"""``dsl`` command line front end.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 a ``--check``
threshold was violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import oracle
from .config import RunConfig, load_config
from .errors import ConfigError, DeltaShockError
from .interaction import default_rho_table
from .switch import default_switch_table
from .uwave import UField
from .vtransport import VField, classify_domain, curves_at, rh_check, v_eval
from .weaklimit import TestFunction, weak_limit_report

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4
FLOAT_FMT = "%.12e"


class CheckFailed(Exception):
    pass


def _tag(value: float) -> str:
    return f"{value:g}"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return "nan"
    return FLOAT_FMT % float(v)


def write_csv(path: Path, header: list, columns: list) -> None:
    rows = [",".join(header)]
    for row in zip(*columns):
        rows.append(",".join(_cell(v) for v in row))
    _atomic_write(path, "\n".join(rows) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")


def _t_max(cfg: RunConfig, times) -> float:
    tstar = cfg.problem.consts.tstar
    return min(5.0 * tstar, max(max(times) + 2 * cfg.eps_list[0] ** 2, tstar / 200.0))


def cmd_tables(cfg: RunConfig, check: bool = False) -> list[str]:
    sw = default_switch_table()
    rt = default_rho_table()
    out = cfg.output_dir
    write_csv(out / "switch_table.csv", ["rho", "B1", "B2"], [sw.rho_grid, sw.B1_values, sw.B2_values])
    write_csv(out / "rho_table.csv", ["tau", "rho", "B1", "I1", "I2"],
              [rt.tau_grid, rt.rho_values, rt.B1_values, rt.I1_values, rt.I2_values])
    failures = []
    if check:
        ident = float(np.max(np.abs(sw.B1_values + sw.B2_values - 1.0)))
        if ident > 1e-9:
            failures.append(f"max |B1 + B2 - 1| = {ident:.3e} > 1e-9")
        settle = abs(1.0 - 2.0 * float(sw.B1(rt.rho_at(rt.tau_max))))
        if settle > 1e-6:
            failures.append(f"|1 - 2 B1(rho(tau_max))| = {settle:.3e} > 1e-6")
        if not abs(rt.tail) < 1e-8:
            failures.append(f"I1 tail {rt.tail:.3e} >= 1e-8")
    return failures


def cmd_snapshot(cfg: RunConfig, check: bool = False) -> list[str]:
    problem = cfg.problem
    uf = UField(problem)
    x = cfg.x_grid
    failures = []
    for eps in cfg.eps_list:
        try:
            vf = VField(problem, eps, uf, t_max=_t_max(cfg, cfg.times), step=cfg.ode_step)
        except DeltaShockError as exc:
            raise type(exc)(f"snapshot eps={eps}: {exc}") from exc
        for t in cfg.times:
            try:
                u = uf(x, t, eps)
                v = v_eval(vf, x, t)
                dom = classify_domain(vf, x, t)
                phi2, p2s, lg, phi1 = curves_at(vf, t)
            except DeltaShockError as exc:
                raise type(exc)(f"snapshot t={t}, eps={eps}: {exc}") from exc
            stem = f"t{_tag(t)}_e{_tag(eps)}"
            write_csv(cfg.output_dir / f"snapshot_{stem}.csv", ["x", "u", "v", "domain"], [x, u, v, dom])
            write_json(cfg.output_dir / f"curves_{stem}.json", {
                "t": t, "eps": eps, "phi2": phi2, "phi2_star": p2s,
                "phi1_star": p2s + float(np.exp(lg)), "log_gap": lg, "phi1": phi1,
            })
            if check and t > 0:
                try:
                    vf.curves.node(t)
                except ValueError:
                    continue  # RH residuals are only defined on curve nodes
                rep = rh_check(vf, t)
                if rep.max_speed > 1e-6 or rep.max_jump > 0.01:
                    failures.append(f"t={t}, eps={eps}: speed {rep.max_speed:.2e}, jump {rep.max_jump:.2e}")
    return failures


def cmd_limits(cfg: RunConfig, check: bool = False) -> list[str]:
    problem = cfg.problem
    etas = [TestFunction(**spec) for spec in cfg.test_functions]
    res_eps = cfg.residual_eps or cfg.eps_list
    eligible = len(res_eps) >= 4 and np.allclose(np.array(res_eps[:-1]) / np.array(res_eps[1:]), 2.0)
    failures = []
    uf = UField(problem)
    for t in cfg.times:
        try:
            rep = weak_limit_report(problem, t, cfg.eps_list, etas if eligible else None,
                                    cfg.window, res_eps, uf)
        except DeltaShockError as exc:
            raise type(exc)(f"limits t={t}: {exc}") from exc
        write_json(cfg.output_dir / f"limits_t{_tag(t)}.json", rep.to_dict())
        same = eligible and list(res_eps) == list(cfg.eps_list)
        R_u = rep.R_u if same else [None] * len(cfg.eps_list)
        R_v = rep.R_v if same else [None] * len(cfg.eps_list)
        write_csv(cfg.output_dir / f"limits_t{_tag(t)}.csv", ["eps", "mass", "location", "R_u", "R_v"],
                  [rep.eps_list, rep.mass_estimates, rep.location_estimates, R_u, R_v])
        if check:
            for eps, m, loc in zip(rep.eps_list, rep.mass_estimates, rep.location_estimates):
                if abs(m - rep.predicted_mass) > 0.05 * abs(rep.predicted_mass):
                    failures.append(f"t={t}, eps={eps}: mass {m:.6g} vs {rep.predicted_mass:.6g}")
                if abs(loc - rep.predicted_location) > 5 * eps:
                    failures.append(f"t={t}, eps={eps}: location {loc:.3e} off by more than 5 eps")
            if rep.u_residual_slope is not None and not 0.8 <= rep.u_residual_slope <= 1.5:
                failures.append(f"t={t}: u residual slope {rep.u_residual_slope:.3f} outside [0.8, 1.5]")
    return failures


def _check_oracle_instance(cfg: RunConfig) -> None:
    d, k = cfg.problem.data, cfg.problem.consts
    ok = (cfg.problem_id == "example12" or (
        (d.U1, d.U0, d.V1, d.V0, d.a2, d.a1) == (1.0, -1.0, 1.0, 1.0, -1.0, 1.0)
        and (k.K, k.b, k.tstar, k.xstar, k.c) == (1.0, 0.0, 1.0, 0.0, 0.0)))
    if not ok:
        raise ConfigError("oracle-compare needs the example12 instance")


def cmd_oracle_compare(cfg: RunConfig, check: bool = False) -> list[str]:
    _check_oracle_instance(cfg)
    times = [t for t in cfg.times if t < oracle.TSTAR]
    if not times:
        raise ConfigError("oracle-compare needs at least one time below 1")
    problem = cfg.problem
    uf = UField(problem)
    x = cfg.x_grid
    summary = []
    failures = []
    for eps in cfg.eps_list:
        vf = VField(problem, eps, uf, t_max=_t_max(cfg, times), step=cfg.ode_step)
        for t in times:
            u = uf(x, t, eps)
            v = v_eval(vf, x, t)
            uo, vo = oracle.oracle_u(x, t), oracle.oracle_v(x, t)
            phi2, p2s, lg, phi1 = curves_at(vf, t)
            radius = cfg.exclusion * eps
            near_edges = (np.abs(x - phi1) <= radius) | (np.abs(x - phi2) <= radius)
            near_all = near_edges | (np.abs(x - p2s) <= radius) | (np.abs(x - p2s - np.exp(lg)) <= radius)
            keep = ~near_all
            eu, ev = np.abs(u - uo), np.abs(v - vo)
            stem = f"t{_tag(t)}_e{_tag(eps)}"
            write_csv(cfg.output_dir / f"oracle_compare_{stem}.csv",
                      ["x", "u", "u_oracle", "u_err", "v", "v_oracle", "v_err", "excluded"],
                      [x, u, uo, eu, v, vo, ev, near_all.astype(float)])
            row = {"t": t, "eps": eps, "points": int(keep.sum()),
                   "u_max": float(eu[keep].max()), "u_mean": float(eu[keep].mean()),
                   "u_max_edges_only": float(eu[~near_edges].max()),
                   "v_max": float(ev[keep].max()), "v_mean": float(ev[keep].mean())}
            summary.append(row)
            if check:
                if row["u_max_edges_only"] > 5 * eps:
                    failures.append(f"t={t}, eps={eps}: sup |u - oracle| = {row['u_max_edges_only']:.3e} > 5 eps")
                if row["v_max"] > 0.05:
                    failures.append(f"t={t}, eps={eps}: sup |v - oracle| = {row['v_max']:.3e} > 0.05")
    write_json(cfg.output_dir / "oracle_compare_summary.json", {"runs": summary})
    return failures


COMMANDS = {
    "tables": cmd_tables,
    "snapshot": cmd_snapshot,
    "limits": cmd_limits,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsl", description="Delta-shock formation by new characteristics.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--check", action="store_true", help="fail (exit 4) when a documented tolerance is violated")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        failures = COMMANDS[args.command](cfg, check=args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DeltaShockError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for line in failures:
        print(f"CHECK FAILED: {line}", file=sys.stderr)
    if failures:
        return EXIT_CHECK
    print(f"{args.command}: outputs written to {cfg.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
