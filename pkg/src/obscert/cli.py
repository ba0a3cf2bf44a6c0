"""Command-line front end: scenario runs, field dumps and constant tables.

Subcommands: certify, gcc, flow, propagate, husimi, constants, sweep.
All artifacts are UTF-8 JSON (reports, constants) and RFC-4180 CSV (fields,
tables), written only after a run completes so failures leave no partial
reports behind.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import certify, classical, phasespace, quantum, scenario
from .certify import CertificationReport, _json_ready
from .classical import IndicatorCutoff, RampCutoff
from .phasespace import ToeplitzState
from .scenario import ConfigError


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _report_filename(r: CertificationReport) -> str:
    return f"{r.scenario}_h{r.hbar:g}_d{r.delta:g}.json"


def _print_reports(reports) -> None:
    head = f"{'scenario':<20}{'hbar':>9}{'delta':>9}{'lower':>12}{'measured':>12}{'margin':>12}  verdict"
    print(head)
    print("-" * len(head))
    for r in reports:
        print(f"{r.scenario:<20}{r.hbar:>9.4g}{r.delta:>9.4g}"
              f"{r.lower_bound:>12.5g}{r.measured:>12.5g}{r.margin:>12.5g}  {r.verdict}")


def _scenario_objects(cfg):
    V = scenario.build_potential(cfg)
    K = scenario.build_compact_set(cfg, V.dim)
    omega = scenario.build_region(cfg, V.dim)
    num = scenario.parse_numerics(cfg.get("numerics", {}))
    return V, K, omega, num


def _sample_table_rows(table):
    dim = table.points.shape[1] // 2
    rows = []
    for pt, occ, hit in zip(table.points, table.occupation, table.first_hit):
        rows.append([*(float(v) for v in pt),
                     float(occ), "" if math.isnan(hit) else float(hit)])
    header = ([f"x{i+1}" for i in range(dim)] + [f"xi{i+1}" for i in range(dim)]
              + ["occupation_time", "first_hit_time"])
    return header, rows


def cmd_certify(args) -> int:
    cfg = scenario.load_config(args.config)
    reports = scenario.run_scenario(cfg, jobs=args.jobs, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in reports:
        _write_json(out / _report_filename(r), r.to_dict())
    _write_csv(out / "sweep.csv",
               ["scenario", "hbar", "delta", "lower_bound", "measured", "margin", "verdict"],
               [[row["scenario"], row["hbar"], row["delta"], row["lower_bound"],
                 row["measured"], row["margin"], row["verdict"]]
                for row in scenario.sweep_rows(reports)])
    _print_reports(reports)
    return 1 if any(r.verdict == "violated" for r in reports) else 0


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.reports:
        rows = []
        for path in sorted(Path(args.reports).glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            if "lower_bound" in data:
                rows.append({k: data[k] for k in
                             ("scenario", "hbar", "delta", "lower_bound",
                              "measured", "margin", "verdict")})
        if not rows:
            print("no reports found", file=sys.stderr)
            return 2
        rows.sort(key=lambda r: (r["hbar"], r["delta"]))
    else:
        cfg = scenario.load_config(args.config)
        reports = scenario.run_scenario(cfg, jobs=args.jobs, seed=args.seed)
        rows = scenario.sweep_rows(reports)
    _write_csv(out / "sweep.csv",
               ["scenario", "hbar", "delta", "lower_bound", "measured", "margin", "verdict"],
               [[r["scenario"], r["hbar"], r["delta"], r["lower_bound"], r["measured"],
                 r["margin"], r["verdict"]] for r in rows])
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return 0


def cmd_gcc(args) -> int:
    cfg = scenario.load_config(args.config)
    V, K, omega, num = _scenario_objects(cfg)
    T = float(cfg["T"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gc = classical.check_geometric_condition(V, K, omega, T, num.dt_flow)
    c_geo, refine = classical.geometric_constant_refined(
        V, K, IndicatorCutoff(omega), T, num.dt_flow)
    header, rows = _sample_table_rows(gc.table)
    _write_csv(out / "gcc.csv", header, rows)
    summary = {
        "scenario": cfg.get("scenario", "scenario"),
        "gc_satisfied": gc.satisfied,
        "c_geo": c_geo,
        "c_geo_refine_delta": refine,
        "chi_geo": {str(d): classical.geometric_constant(
            V, K, RampCutoff(omega, float(d)), T, num.dt_flow) for d in cfg["deltas"]},
        "samples": len(rows),
    }
    _write_json(out / "gcc.json", summary)
    print(f"GC satisfied: {gc.satisfied}   C_geo = {c_geo:.6g} "
          f"(refinement delta {refine:.2e})")
    return 0


def cmd_flow(args) -> int:
    cfg = scenario.load_config(args.config)
    V, K, omega, num = _scenario_objects(cfg)
    T = float(cfg["T"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = classical.geometric_constant_table(
        V, K, IndicatorCutoff(omega), T, num.dt_flow)
    header, rows = _sample_table_rows(table)
    _write_csv(out / "flow.csv", header, rows)
    print(f"wrote {out / 'flow.csv'} ({len(rows)} samples)")
    return 0


def cmd_propagate(args) -> int:
    cfg = scenario.load_config(args.config)
    V, K, omega, num = _scenario_objects(cfg)
    grid = scenario.build_grid(num, V.dim)
    hbar = float(sorted(cfg["hbars"])[0])
    state = scenario.build_state(cfg["state"], grid, hbar, K)
    if isinstance(state, ToeplitzState):
        print("propagate needs a pure state; pick a coherent/gaussian/superposition state",
              file=sys.stderr)
        return 2
    T = float(cfg["T"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    times = np.linspace(0.0, T, num.slices)
    rows = []
    saved = [0]

    def observer(t, psi_t):
        if saved[0] < len(times) and t >= times[saved[0]] - 1e-12:
            dens = psi_t.density()
            for pt, d in zip(grid.points(), dens.reshape(-1)):
                rows.append([float(t), *(float(v) for v in pt), float(d)])
            saved[0] += 1

    final = quantum.propagate_series(V, state, T, num.dt, observer)
    header = ["t"] + [f"x{i+1}" for i in range(grid.dim)] + ["density"]
    _write_csv(out / "density.csv", header, rows)
    quantum.save_state(out / "final_state.qst", final, t=T)
    print(f"wrote {out / 'density.csv'} and {out / 'final_state.qst'} "
          f"(hbar={hbar:g}, final norm {final.norm:.12f})")
    return 0


def cmd_husimi(args) -> int:
    cfg = scenario.load_config(args.config)
    V, K, omega, num = _scenario_objects(cfg)
    if V.dim != 1:
        print("husimi fields are emitted for dim 1 only", file=sys.stderr)
        return 2
    grid = scenario.build_grid(num, V.dim)
    hbar = float(sorted(cfg["hbars"])[0])
    state = scenario.build_state(cfg["state"], grid, hbar, K)
    if isinstance(state, ToeplitzState):
        print("husimi needs a pure state", file=sys.stderr)
        return 2
    pg = num.phase_grid or {}
    side = 4.0 * math.sqrt(hbar)
    q_spec = pg.get("q")
    p_spec = pg.get("p")
    if q_spec is None or p_spec is None:
        qm, _ = quantum.position_moments(state)
        pm, _ = quantum.momentum_moments(state)
        q_spec = q_spec or [qm[0] - side, qm[0] + side, 65]
        p_spec = p_spec or [pm[0] - side, pm[0] + side, 65]
    q_axis = np.linspace(float(q_spec[0]), float(q_spec[1]), int(q_spec[2]))
    p_axis = np.linspace(float(p_spec[0]), float(p_spec[1]), int(p_spec[2]))
    field = phasespace.husimi(state, q_axis, p_axis)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[float(q), float(p), float(field.values[i, j])]
            for i, q in enumerate(q_axis) for j, p in enumerate(p_axis)]
    _write_csv(out / "husimi.csv", ["x", "xi", "value"], rows)
    print(f"wrote {out / 'husimi.csv'} (integral over window {field.integral():.6f})")
    return 0


def cmd_constants(args) -> int:
    cfg = scenario.load_config(args.config)
    V, K, omega, num = _scenario_objects(cfg)
    T = float(cfg["T"])
    lip = V.lip_grad
    c_tl, lam_star = certify.toeplitz_coefficient_details(T, lip)
    payload = {
        "T": T,
        "lip_grad": lip,
        "d_K": K.diameter,
        "spread_coefficient": certify.spread_coefficient(T, lip),
        "toeplitz_coefficient": c_tl,
        "toeplitz_coefficient_lambda": lam_star,
        "balanced_growth_root": certify.balanced_growth_root(),
        "growth_factors": {
            str(lam): [_growth(lam, lip, t) for t in (0.5, 1.0, 1.5, 2.0)]
            for lam in (0.5, 1.0, 2.0)
        },
    }
    if lip > 0:
        f1, f2 = certify.lambda_equals_lip_bounds(T, lip)
        payload["lambda_equals_lip_bound"] = f1
        payload["lambda_equals_lip_bound_alt"] = f2
    else:
        lam0, val0 = certify.zero_lip_candidate(T)
        payload["zero_lip_lambda"] = lam0
        payload["zero_lip_bound"] = val0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "constants.json", payload)
    for key, value in payload.items():
        if not isinstance(value, dict):
            print(f"{key:>32}: {value}")
    return 0


def _growth(lam, lip, t):
    from .transport import CostParams, growth_factor
    return growth_factor(CostParams(lam=lam, hbar=1.0), lip, t)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="obscert",
        description="Numerical certification of observability inequalities "
                    "for the semiclassical Schrodinger equation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [("certify", cmd_certify), ("gcc", cmd_gcc), ("flow", cmd_flow),
                     ("propagate", cmd_propagate), ("husimi", cmd_husimi),
                     ("constants", cmd_constants), ("sweep", cmd_sweep)]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "sweep"))
        p.add_argument("--out", default="out")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        if name == "sweep":
            p.add_argument("--reports", default=None,
                           help="tabulate existing report JSONs instead of running")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    if args.command == "sweep" and not args.reports and not args.config:
        parser.error("sweep needs --config or --reports")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except quantum.NumericsError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
