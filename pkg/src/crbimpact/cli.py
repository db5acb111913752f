"""Command-line interface.

Subcommands: predict, eval, simulate, phase, condnum, model-check.
Vector-valued options accept inline comma-separated numbers or a
``@file`` reference (JSON array or whitespace/comma separated text).
Exit codes: 0 success, 1 I/O or parse failure, 2 mathematical
precondition failure (singular configuration, assumption violation,
integrator stability bound).

Every command that writes files also writes a ``manifest.json`` holding
the resolved parameters and SHA-256 digests of the outputs; re-running
the same command reproduces the same digests.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__, dynamics, evaluation, impact, sim
from .errors import (
    CrbImpactError,
    DatasetError,
    DegenerateInertiaError,
    ModelValidationError,
    SimulationError,
    SingularConfigurationError,
)
from .model import load_model, validate_model

_F = "{:.6g}".format


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the parse code (1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_vector(text: str, expect: int | None = None) -> np.ndarray:
    """Parse '1,2,3' or '@file' into a float vector."""
    if text.startswith("@"):
        content = Path(text[1:]).read_text(encoding="utf-8").strip()
        try:
            values = json.loads(content)
        except json.JSONDecodeError:
            values = [float(tok) for tok in re.split(r"[\s,]+", content) if tok]
    else:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    arr = np.array(values, dtype=float).reshape(-1)
    if expect is not None and arr.size != expect:
        raise ValueError(f"expected {expect} numbers, got {arr.size}")
    return arr


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def _write_manifest(outdir: Path, command: str, params: dict, inputs: dict, outputs: list[Path]):
    manifest = {
        "tool": "crbimpact",
        "version": __version__,
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "parameters": {k: _jsonable(v) for k, v in sorted(params.items())},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _prepare_outdir(args) -> Path | None:
    if args.out is None:
        return None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _contact_rotation(args):
    normal = parse_vector(args.normal, 3)
    hint = parse_vector(args.hint_tangent, 3) if args.hint_tangent else None
    return impact.contact_frame(normal, hint).rotation


def _add_common(parser, model_required=True):
    parser.add_argument("--model", required=model_required, help="chain model JSON file")
    parser.add_argument("--out", default=None, help="output directory (also gets manifest.json)")
    parser.add_argument("--json", action="store_true", help="emit JSON on stdout")
    parser.add_argument("--seed", type=int, default=None, help="random seed override")


def _add_frame_flags(parser):
    parser.add_argument(
        "--normal", default="0,0,1", help="surface normal, inertial coords (default 0,0,1)"
    )
    parser.add_argument(
        "--hint-tangent", default=None, help="preferred tangent direction for the contact x axis"
    )


# --------------------------------------------------------------------------
# predict


def _predict_payload(args) -> dict:
    model = load_model(args.model)
    q = parse_vector(args.q, model.dof)
    rotation = _contact_rotation(args)
    geom = dynamics.chain_geometry(model, q)
    jac = rotation @ dynamics.point_jacobian_linear(model, q, geom)
    gram = jac @ jac.T
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= dynamics.RANK_EPS * max(np.trace(gram), 0.0):
        raise SingularConfigurationError(
            "contact Jacobian is rank deficient at this configuration "
            "(needs 3 independent contact directions)"
        )
    if (args.qd is None) == (args.v_pre is None):
        raise ValueError("exactly one of --qd or --v-pre is required")
    if args.qd is not None:
        qd = parse_vector(args.qd, model.dof)
        v_pre = jac @ qd
    else:
        v_pre = parse_vector(args.v_pre, 3)
    mass = dynamics.jsim(model, q, geom)
    w_crb = dynamics.iim_crb(model, q, rotation, geom)
    w_gm = dynamics.iim_gm(model, q, rotation, geom, mass_matrix=mass.matrix)
    dv = impact.delta_v(v_pre, args.cr)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    payload = {
        "model": model.name,
        "q": q.tolist(),
        "pre_impact_contact_velocity": v_pre.tolist(),
        "restitution": args.cr,
        "friction": args.mu,
        "normal": parse_vector(args.normal, 3).tolist(),
        "jsim_condition_number": mass.condition_number,
        "stick_coefficient_crb": impact.stick_coefficient(w_crb),
        "methods": {},
    }
    for method in methods:
        if method == impact.CLASSICAL:
            pred = impact.predict_classical(jac, mass, dv, tangential_mode=args.tangential_mode)
            target = w_gm.matrix @ pred.impulse.vector
            extra = {"tangential_mode": args.tangential_mode}
        elif method == impact.CRB:
            imp = impact.normal_impulse(w_crb, v_pre[2], args.cr)
            pred = impact.predict_crb(jac, w_crb, imp)
            target = w_crb.matrix @ imp.vector
            extra = {}
        elif method == impact.GM:
            imp = impact.normal_impulse(w_gm, v_pre[2], args.cr)
            pred = impact.predict_gm(jac, w_gm, imp)
            target = w_gm.matrix @ imp.vector
            extra = {}
        else:
            raise ValueError(f"unknown method '{method}'")
        cone = impact.friction_cone_check(pred.impulse, args.mu)
        payload["methods"][method] = {
            "delta_qd": pred.delta_qd.tolist(),
            "impulse": pred.impulse.vector.tolist(),
            "residual": float(np.linalg.norm(jac @ pred.delta_qd - target)),
            "cone_satisfied": cone.satisfied,
            "cone_margin": cone.margin,
            **extra,
        }
    return payload


def cmd_predict(args) -> int:
    payload = _predict_payload(args)
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"model: {payload['model']}   kappa(M) = {_F(payload['jsim_condition_number'])}   "
              f"stick coefficient = {_F(payload['stick_coefficient_crb'])}")
        print(f"v_pre (contact) = {' '.join(_F(x) for x in payload['pre_impact_contact_velocity'])}")
        for method, row in payload["methods"].items():
            print(f"{method:>10}: delta_qd = {' '.join(_F(x) for x in row['delta_qd'])}")
            print(
                f"{'':>10}  impulse = {' '.join(_F(x) for x in row['impulse'])}  "
                f"residual = {row['residual']:.3e}  cone margin = {_F(row['cone_margin'])}"
            )
    outdir = _prepare_outdir(args)
    if outdir is not None:
        out = outdir / "prediction.json"
        out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        _write_manifest(
            outdir, "predict",
            {k: v for k, v in vars(args).items() if k not in ("func", "out")},
            {"model": args.model}, [out],
        )
    return 0


# --------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    model = load_model(args.model)
    records = evaluation.load_dataset(args.dataset, model.dof)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    hint = parse_vector(args.hint_tangent, 3) if args.hint_tangent else None
    report = evaluation.evaluate_dataset(
        model,
        records,
        methods,
        use_measured_impulse=args.measured_impulse,
        per_rep=args.per_rep,
        normal=parse_vector(args.normal, 3),
        hint_tangent=hint,
    )
    json_text = evaluation.report_to_json(report)
    if args.json:
        print(json_text, end="")
    else:
        pooled = "  ".join(f"{m}={_F(report.pooled_average[m])}" for m in report.methods)
        print(f"groups evaluated: {len(report.groups)}  skipped: {len(report.skipped)}")
        print(f"pooled average error [rad/s]: {pooled}")
        if report.reduction_pooled is not None:
            per_cfg = np.mean(list(report.reduction_per_config.values()))
            print(
                f"error reduction, crb vs classical: {report.reduction_pooled:.2f}% pooled, "
                f"{per_cfg:.2f}% mean per-config"
            )
        for skip in report.skipped:
            print(f"skipped {skip.config_id}: {skip.reason}", file=sys.stderr)
    outdir = _prepare_outdir(args)
    if outdir is not None:
        outputs = []
        csv_path = outdir / "report.csv"
        csv_path.write_text(evaluation.report_to_csv(report), encoding="utf-8")
        outputs.append(csv_path)
        json_path = outdir / "report.json"
        json_path.write_text(json_text, encoding="utf-8")
        outputs.append(json_path)
        if not args.no_figures:
            from . import plotting

            fig_path = outdir / "average_error.png"
            plotting.save_error_figure(report, fig_path)
            outputs.append(fig_path)
        _write_manifest(
            outdir, "eval",
            {k: v for k, v in vars(args).items() if k not in ("func", "out")},
            {"model": args.model, "dataset": args.dataset}, outputs,
        )
    return 0


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    scenario = sim.load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    records = sim.generate_dataset(model, scenario)
    csv_text = evaluation.records_to_csv(records, model.dof)
    outdir = _prepare_outdir(args)
    if outdir is None:
        raise ValueError("simulate requires --out")
    csv_path = outdir / "dataset.csv"
    csv_path.write_text(csv_text, encoding="utf-8")
    _write_manifest(
        outdir, "simulate",
        {k: v for k, v in vars(args).items() if k not in ("func", "out")},
        {"model": args.model, "scenario": args.scenario}, [csv_path],
    )
    groups = len({r.config_id for r in records})
    print(f"wrote {len(records)} rows ({groups} groups) to {csv_path}")
    return 0


# --------------------------------------------------------------------------
# phase


def cmd_phase(args) -> int:
    model = load_model(args.model)
    q = parse_vector(args.q, model.dof)
    rotation = _contact_rotation(args)
    geom = dynamics.chain_geometry(model, q)
    jac = rotation @ dynamics.point_jacobian_linear(model, q, geom)
    gram = jac @ jac.T
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= dynamics.RANK_EPS * max(np.trace(gram), 0.0):
        raise SingularConfigurationError("contact Jacobian is rank deficient")
    w = dynamics.iim_crb(model, q, rotation, geom)
    xr = parse_vector(args.x_range, 2)
    yr = parse_vector(args.y_range, 2)
    grid = impact.PhaseGrid((xr[0], xr[1]), (yr[0], yr[1]), args.resolution, args.resolution)
    field = impact.tangential_phase_field(w, args.mu, grid)

    lines = ["x,y,dx,dy"]
    for p, d in zip(field.points, field.directions):
        lines.append(",".join("{:.12g}".format(v) for v in (p[0], p[1], d[0], d[1])))
    csv_text = "\n".join(lines) + "\n"
    summary = {
        "friction": field.friction,
        "stick_coefficient": field.stick_coefficient,
        "origin_stable": field.origin_stable,
        "isotropic": field.isotropic,
        "invariant_directions": [
            {"direction": inv.direction.tolist(), "converging": inv.converging}
            for inv in field.invariant_directions
        ],
    }
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(
            f"stick coefficient = {_F(field.stick_coefficient)}  "
            f"origin {'stable' if field.origin_stable else 'unstable'}  "
            f"{len(field.invariant_directions)} invariant direction(s)"
            f"{' (isotropic)' if field.isotropic else ''}"
        )
        for inv in field.invariant_directions:
            tag = "converging" if inv.converging else "diverging"
            print(f"  [{_F(inv.direction[0])}, {_F(inv.direction[1])}]  {tag}")
    outdir = _prepare_outdir(args)
    if outdir is not None:
        outputs = []
        csv_path = outdir / "field.csv"
        csv_path.write_text(csv_text, encoding="utf-8")
        outputs.append(csv_path)
        json_path = outdir / "phase.json"
        json_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        outputs.append(json_path)
        if not args.no_figures:
            from . import plotting

            fig_path = outdir / "phase_field.png"
            plotting.save_phase_figure(field, fig_path)
            outputs.append(fig_path)
        _write_manifest(
            outdir, "phase",
            {k: v for k, v in vars(args).items() if k not in ("func", "out")},
            {"model": args.model}, outputs,
        )
    return 0


# --------------------------------------------------------------------------
# condnum


def cmd_condnum(args) -> int:
    rows: list[tuple[str, float]] = []
    if args.matrix:
        matrix = np.array(json.loads(Path(args.matrix).read_text(encoding="utf-8")), dtype=float)
        rows.append(("matrix", dynamics.condition_number(matrix)))
    else:
        model = load_model(args.model)
        configs: list[np.ndarray] = []
        labels: list[str] = []
        for i, spec in enumerate(args.q or []):
            configs.append(parse_vector(spec, model.dof))
            labels.append(f"q{i}")
        if args.configs:
            data = json.loads(Path(args.configs).read_text(encoding="utf-8"))
            for i, row in enumerate(data):
                configs.append(np.array(row, dtype=float).reshape(model.dof))
                labels.append(f"cfg{i}")
        if args.random:
            rng = np.random.default_rng(args.seed if args.seed is not None else 0)
            for i in range(args.random):
                configs.append(rng.uniform(-np.pi, np.pi, model.dof))
                labels.append(f"rand{i}")
        if not configs:
            raise ValueError("condnum needs --q, --configs, or --random")
        for label, q in zip(labels, configs):
            rows.append((label, dynamics.jsim(model, q).condition_number))

    payload = {
        "warn_threshold": args.warn,
        "rows": [
            {"config": label, "condition_number": kappa, "warn": kappa > args.warn}
            for label, kappa in rows
        ],
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for row in payload["rows"]:
            flag = "  WARN" if row["warn"] else ""
            print(f"{row['config']:>8}  kappa = {_F(row['condition_number'])}{flag}")
    outdir = _prepare_outdir(args)
    if outdir is not None:
        csv_path = outdir / "condnum.csv"
        lines = ["config,condition_number,warn"]
        for row in payload["rows"]:
            lines.append(
                f"{row['config']},{_F(row['condition_number'])},{int(row['warn'])}"
            )
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        _write_manifest(
            outdir, "condnum",
            {k: v for k, v in vars(args).items() if k not in ("func", "out")},
            {"model": args.model or ""}, [csv_path],
        )
    return 0


# --------------------------------------------------------------------------
# model-check


def cmd_model_check(args) -> int:
    try:
        model = load_model(args.model)
    except ModelValidationError as exc:
        if args.json:
            print(json.dumps({
                "valid": False,
                "diagnostics": [
                    {"code": d.code, "path": d.path, "message": d.message}
                    for d in exc.diagnostics
                ],
            }, indent=2))
        else:
            for d in exc.diagnostics:
                print(f"{d.code}  {d.path}  {d.message}", file=sys.stderr)
        return 1
    diags = validate_model(model)
    if args.json:
        print(json.dumps({
            "valid": not diags,
            "name": model.name,
            "dof": model.dof,
            "total_mass": model.total_mass,
            "diagnostics": [
                {"code": d.code, "path": d.path, "message": d.message} for d in diags
            ],
        }, indent=2))
    else:
        print(f"model '{model.name}': D={model.dof}, total mass {_F(model.total_mass)} kg, "
              f"{'OK' if not diags else f'{len(diags)} problem(s)'}")
        for d in diags:
            print(f"{d.code}  {d.path}  {d.message}", file=sys.stderr)
    return 0 if not diags else 1


# --------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="crbimpact", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"crbimpact {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="predict the joint velocity jump for one impact")
    _add_common(p)
    _add_frame_flags(p)
    p.add_argument("--q", required=True, help="joint positions (inline or @file)")
    p.add_argument("--qd", default=None, help="pre-impact joint velocities")
    p.add_argument("--v-pre", default=None, help="pre-impact contact velocity, contact coords")
    p.add_argument("--cr", type=float, default=0.0, help="coefficient of restitution")
    p.add_argument("--mu", type=float, default=0.0, help="friction coefficient")
    p.add_argument("--methods", default="crb,classical,gm", help="comma-separated method list")
    p.add_argument("--tangential-mode", choices=("full", "normal_only"), default="normal_only",
                   help="classical impulse handling (default: normal_only)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="replay a dataset and score the predictors")
    _add_common(p)
    _add_frame_flags(p)
    p.add_argument("--dataset", required=True, help="experiment CSV file")
    p.add_argument("--methods", default="crb,classical,gm")
    p.add_argument("--measured-impulse", action="store_true",
                   help="substitute the measured impulse into every method")
    p.add_argument("--per-rep", action="store_true",
                   help="score each repetition instead of the group mean")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a scenario grid")
    _add_common(p)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("phase", help="tangential-velocity phase field at a configuration")
    _add_common(p)
    _add_frame_flags(p)
    p.add_argument("--q", required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--x-range", default="-0.15,0.15")
    p.add_argument("--y-range", default="-0.15,0.15")
    p.add_argument("--resolution", type=int, default=21)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("condnum", help="mass-matrix condition numbers over configurations")
    _add_common(p, model_required=False)
    p.add_argument("--q", action="append", help="a configuration (repeatable)")
    p.add_argument("--configs", default=None, help="JSON file with a list of configurations")
    p.add_argument("--random", type=int, default=0, help="number of random configurations")
    p.add_argument("--warn", type=float, default=1e3, help="warn threshold (default 1e3)")
    p.add_argument("--matrix", default=None, help="JSON matrix file (direct injection hook)")
    p.set_defaults(func=cmd_condnum)

    p = sub.add_parser("model-check", help="validate a model file")
    _add_common(p)
    p.set_defaults(func=cmd_model_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "condnum" and not args.matrix and not args.model:
        parser.error("condnum needs --model (or --matrix)")
    try:
        return args.func(args)
    except (ModelValidationError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SingularConfigurationError, DegenerateInertiaError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CrbImpactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
