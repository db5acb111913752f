"""Experiment-record replay, error metrics, and comparison reports.

Datasets are comma-delimited UTF-8 text with the header

    config_id,rep,q1..qD,qd1..qdD,djd1..djdD,imp_x,imp_y,imp_z,
    v_ref_n,v_ref_t1,v_ref_t2,cr,mu

where djd* is the measured joint velocity jump and the impulse cells may
be empty when no measured impulse exists. Reports compare predictors by
the signed per-joint error and its mean absolute value; the headline
aggregate is the percent reduction of the composite-rigid-body method
against the classical one.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics, impact
from .errors import DatasetError, SingularConfigurationError
from .model import ChainModel

CSV_FLOAT = "{:.12g}"  # dataset files: machine-replay precision
REPORT_FLOAT = "{:.6g}"  # report tables: human precision


@dataclass(frozen=True)
class ExperimentRecord:
    """One impact experiment: pre-impact state plus measured outcomes."""

    config_id: str
    repetition: int
    q: np.ndarray
    qd_pre: np.ndarray
    delta_qd_measured: np.ndarray
    impulse_measured: np.ndarray | None
    v_ref_normal: float
    v_ref_tangential: np.ndarray
    restitution: float
    friction: float

    def __post_init__(self):
        for name in ("q", "qd_pre", "delta_qd_measured"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float).reshape(-1))
        if self.impulse_measured is not None:
            object.__setattr__(
                self, "impulse_measured", np.array(self.impulse_measured, dtype=float).reshape(3)
            )
        object.__setattr__(
            self, "v_ref_tangential", np.array(self.v_ref_tangential, dtype=float).reshape(2)
        )
        if not self.q.shape == self.qd_pre.shape == self.delta_qd_measured.shape:
            raise ValueError("q, qd_pre, and delta_qd_measured must share one length")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError(f"restitution {self.restitution} outside [0, 1]")
        if self.friction < 0.0:
            raise ValueError(f"friction {self.friction} must be >= 0")


@dataclass(frozen=True)
class AggregatedRecord:
    """Componentwise mean of one configuration's repetitions, with stds."""

    config_id: str
    n_reps: int
    q: np.ndarray
    qd_pre: np.ndarray
    delta_qd_measured: np.ndarray
    impulse_measured: np.ndarray | None
    v_ref_normal: float
    v_ref_tangential: np.ndarray
    restitution: float
    friction: float
    q_std: np.ndarray
    qd_pre_std: np.ndarray
    delta_qd_std: np.ndarray


def dataset_header(dof: int) -> list[str]:
    cols = ["config_id", "rep"]
    cols += [f"q{i + 1}" for i in range(dof)]
    cols += [f"qd{i + 1}" for i in range(dof)]
    cols += [f"djd{i + 1}" for i in range(dof)]
    cols += ["imp_x", "imp_y", "imp_z", "v_ref_n", "v_ref_t1", "v_ref_t2", "cr", "mu"]
    return cols


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError as exc:
        raise DatasetError(f"column '{col}': cannot parse '{cell}' as a number", row) from exc


def load_dataset(source, dof: int) -> list[ExperimentRecord]:
    """Parse a dataset file (path or text); rows validated against ``dof``."""
    if isinstance(source, (str, Path)) and "\n" not in str(source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DatasetError("empty dataset")
    header = lines[0].split(",")
    expected = dataset_header(dof)
    if header != expected:
        raise DatasetError(
            f"header mismatch: expected '{','.join(expected)}', got '{lines[0]}'"
        )
    records: list[ExperimentRecord] = []
    for row_no, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(expected):
            raise DatasetError(
                f"expected {len(expected)} columns, got {len(cells)}", row_no
            )
        config_id = cells[0]
        try:
            rep = int(cells[1])
        except ValueError as exc:
            raise DatasetError(f"column 'rep': cannot parse '{cells[1]}'", row_no) from exc
        q = [_parse_float(cells[2 + i], row_no, f"q{i + 1}") for i in range(dof)]
        qd = [_parse_float(cells[2 + dof + i], row_no, f"qd{i + 1}") for i in range(dof)]
        djd = [_parse_float(cells[2 + 2 * dof + i], row_no, f"djd{i + 1}") for i in range(dof)]
        base = 2 + 3 * dof
        imp_cells = cells[base : base + 3]
        if all(c.strip() == "" for c in imp_cells):
            imp = None
        elif any(c.strip() == "" for c in imp_cells):
            raise DatasetError("impulse columns must be all empty or all present", row_no)
        else:
            imp = [_parse_float(c, row_no, n) for c, n in zip(imp_cells, ("imp_x", "imp_y", "imp_z"))]
        v_ref_n = _parse_float(cells[base + 3], row_no, "v_ref_n")
        v_ref_t = [
            _parse_float(cells[base + 4], row_no, "v_ref_t1"),
            _parse_float(cells[base + 5], row_no, "v_ref_t2"),
        ]
        cr = _parse_float(cells[base + 6], row_no, "cr")
        mu = _parse_float(cells[base + 7], row_no, "mu")
        try:
            records.append(
                ExperimentRecord(config_id, rep, q, qd, djd, imp, v_ref_n, v_ref_t, cr, mu)
            )
        except ValueError as exc:
            raise DatasetError(str(exc), row_no) from exc
    return records


def records_to_csv(records, dof: int) -> str:
    """Render records in the dataset schema with fixed formatting."""
    buf = io.StringIO()
    buf.write(",".join(dataset_header(dof)) + "\n")
    for rec in records:
        cells = [rec.config_id, str(rec.repetition)]
        for arr in (rec.q, rec.qd_pre, rec.delta_qd_measured):
            cells += [CSV_FLOAT.format(x) for x in arr]
        if rec.impulse_measured is None:
            cells += ["", "", ""]
        else:
            cells += [CSV_FLOAT.format(x) for x in rec.impulse_measured]
        cells.append(CSV_FLOAT.format(rec.v_ref_normal))
        cells += [CSV_FLOAT.format(x) for x in rec.v_ref_tangential]
        cells.append(CSV_FLOAT.format(rec.restitution))
        cells.append(CSV_FLOAT.format(rec.friction))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def _std(stack: np.ndarray) -> np.ndarray:
    if stack.shape[0] < 2:
        return np.zeros(stack.shape[1])
    return np.std(stack, axis=0, ddof=1)


def aggregate_repetitions(records) -> AggregatedRecord:
    """Mean record of one configuration group plus sample deviations."""
    records = list(records)
    if not records:
        raise ValueError("empty repetition group")
    config_id = records[0].config_id
    if any(r.config_id != config_id for r in records):
        raise ValueError("aggregate_repetitions got mixed config_ids")
    q = np.stack([r.q for r in records])
    qd = np.stack([r.qd_pre for r in records])
    djd = np.stack([r.delta_qd_measured for r in records])
    have_imp = [r.impulse_measured is not None for r in records]
    if all(have_imp):
        imps = np.stack([r.impulse_measured for r in records])
        imp_mean = imps.mean(axis=0)
    else:
        imp_mean = None
    return AggregatedRecord(
        config_id=config_id,
        n_reps=len(records),
        q=q.mean(axis=0),
        qd_pre=qd.mean(axis=0),
        delta_qd_measured=djd.mean(axis=0),
        impulse_measured=imp_mean,
        v_ref_normal=float(np.mean([r.v_ref_normal for r in records])),
        v_ref_tangential=np.mean([r.v_ref_tangential for r in records], axis=0),
        restitution=float(np.mean([r.restitution for r in records])),
        friction=float(np.mean([r.friction for r in records])),
        q_std=_std(q),
        qd_pre_std=_std(qd),
        delta_qd_std=_std(djd),
    )


def absolute_error(pred, meas) -> np.ndarray:
    """Signed per-joint prediction error (predicted minus measured)."""
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {meas.shape}")
    return pred - meas


def average_error(pred, meas) -> float:
    """Mean absolute per-joint prediction error."""
    return float(np.mean(np.abs(absolute_error(pred, meas))))


@dataclass(frozen=True)
class MethodGroupResult:
    method: str
    prediction: np.ndarray
    impulse: np.ndarray
    error: np.ndarray
    average_error: float


@dataclass(frozen=True)
class GroupResult:
    config_id: str
    n_reps: int
    measured: np.ndarray
    v_pre: np.ndarray
    restitution: float
    friction: float
    results: dict[str, MethodGroupResult]


@dataclass(frozen=True)
class SkippedGroup:
    config_id: str
    reason: str


@dataclass(frozen=True)
class ErrorReport:
    methods: tuple[str, ...]
    groups: tuple[GroupResult, ...]
    skipped: tuple[SkippedGroup, ...]
    pooled_average: dict[str, float]
    reduction_per_config: dict[str, float] | None
    reduction_pooled: float | None
    used_measured_impulse: bool
    per_rep: bool


def _predict_group(model, methods, q, qd, cr, mu, imp_measured, use_measured, rotation):
    geom = dynamics.chain_geometry(model, q)
    jac = rotation @ dynamics.point_jacobian_linear(model, q, geom)
    gram = jac @ jac.T
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= dynamics.RANK_EPS * max(np.trace(gram), 0.0):
        raise SingularConfigurationError("contact Jacobian is rank deficient")
    mass = dynamics.jsim(model, q, geom)
    v_pre = jac @ qd
    dv = impact.delta_v(v_pre, cr)
    out: dict[str, MethodGroupResult] = {}
    for method in methods:
        if method == impact.CLASSICAL:
            if use_measured:
                pred = impact.predict_with_impulse(method, jac, imp_measured, mass=mass)
            else:
                pred = impact.predict_classical(jac, mass, dv, tangential_mode="normal_only")
        elif method in (impact.CRB, impact.GM):
            if method == impact.CRB:
                w = dynamics.iim_crb(model, q, rotation, geom)
            else:
                w = dynamics.iim_gm(model, q, rotation, geom, mass_matrix=mass.matrix)
            if use_measured:
                pred = impact.predict_with_impulse(method, jac, imp_measured, w=w)
            else:
                imp = impact.normal_impulse(w, v_pre[2], cr)
                pred = impact.predict_crb(jac, w, imp) if method == impact.CRB else impact.predict_gm(jac, w, imp)
        else:
            raise ValueError(f"unknown method '{method}'")
        out[method] = pred
    return v_pre, out


def evaluate_dataset(
    model: ChainModel,
    records,
    methods,
    use_measured_impulse: bool = False,
    per_rep: bool = False,
    normal=(0.0, 0.0, 1.0),
    hint_tangent=None,
) -> ErrorReport:
    """Replay records through the requested predictors and score them.

    Predictions are computed on the mean record of each configuration
    group (set ``per_rep`` to score each repetition individually). The
    contact frame is built from ``normal``/``hint_tangent`` since the
    dataset schema carries no surface orientation. Groups at singular
    configurations are skipped with a diagnostic instead of failing the
    whole run.
    """
    methods = list(methods)
    for method in methods:
        if method not in impact.METHODS:
            raise ValueError(f"unknown method '{method}'")
    frame = impact.contact_frame(np.asarray(normal, dtype=float), hint_tangent)
    rotation = frame.rotation

    grouped: dict[str, list[ExperimentRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.config_id, []).append(rec)

    groups: list[GroupResult] = []
    skipped: list[SkippedGroup] = []
    for config_id in sorted(grouped):
        group = grouped[config_id]
        agg = aggregate_repetitions(group)
        if use_measured_impulse and agg.impulse_measured is None:
            raise DatasetError(
                f"group '{config_id}' has no measured impulse; "
                "--measured-impulse needs the imp_x/imp_y/imp_z columns filled"
            )
        try:
            if per_rep:
                per_method_err: dict[str, list[np.ndarray]] = {m: [] for m in methods}
                per_method_avg: dict[str, list[float]] = {m: [] for m in methods}
                per_method_pred: dict[str, list[np.ndarray]] = {m: [] for m in methods}
                per_method_imp: dict[str, list[np.ndarray]] = {m: [] for m in methods}
                v_pre_list = []
                for rec in group:
                    v_pre, preds = _predict_group(
                        model, methods, rec.q, rec.qd_pre, rec.restitution, rec.friction,
                        rec.impulse_measured, use_measured_impulse, rotation,
                    )
                    v_pre_list.append(v_pre)
                    for m, pred in preds.items():
                        err = absolute_error(pred.delta_qd, rec.delta_qd_measured)
                        per_method_err[m].append(err)
                        per_method_avg[m].append(float(np.mean(np.abs(err))))
                        per_method_pred[m].append(pred.delta_qd)
                        per_method_imp[m].append(pred.impulse.vector)
                results = {
                    m: MethodGroupResult(
                        method=m,
                        prediction=np.mean(per_method_pred[m], axis=0),
                        impulse=np.mean(per_method_imp[m], axis=0),
                        error=np.mean(per_method_err[m], axis=0),
                        average_error=float(np.mean(per_method_avg[m])),
                    )
                    for m in methods
                }
                v_pre = np.mean(v_pre_list, axis=0)
            else:
                v_pre, preds = _predict_group(
                    model, methods, agg.q, agg.qd_pre, agg.restitution, agg.friction,
                    agg.impulse_measured, use_measured_impulse, rotation,
                )
                results = {}
                for m, pred in preds.items():
                    err = absolute_error(pred.delta_qd, agg.delta_qd_measured)
                    results[m] = MethodGroupResult(
                        method=m,
                        prediction=pred.delta_qd,
                        impulse=pred.impulse.vector,
                        error=err,
                        average_error=float(np.mean(np.abs(err))),
                    )
        except SingularConfigurationError as exc:
            skipped.append(SkippedGroup(config_id, str(exc)))
            continue
        groups.append(
            GroupResult(
                config_id=config_id,
                n_reps=agg.n_reps,
                measured=agg.delta_qd_measured,
                v_pre=v_pre,
                restitution=agg.restitution,
                friction=agg.friction,
                results=results,
            )
        )

    pooled = {
        m: float(np.mean([g.results[m].average_error for g in groups])) if groups else float("nan")
        for m in methods
    }
    reduction_per_config = None
    reduction_pooled = None
    if impact.CRB in methods and impact.CLASSICAL in methods and groups:
        reduction_per_config = {
            g.config_id: 100.0 * (1.0 - g.results[impact.CRB].average_error
                                  / g.results[impact.CLASSICAL].average_error)
            for g in groups
            if g.results[impact.CLASSICAL].average_error > 0.0
        }
        if pooled[impact.CLASSICAL] > 0.0:
            reduction_pooled = 100.0 * (1.0 - pooled[impact.CRB] / pooled[impact.CLASSICAL])
    return ErrorReport(
        methods=tuple(methods),
        groups=tuple(groups),
        skipped=tuple(skipped),
        pooled_average=pooled,
        reduction_per_config=reduction_per_config,
        reduction_pooled=reduction_pooled,
        used_measured_impulse=use_measured_impulse,
        per_rep=per_rep,
    )


def report_to_csv(report: ErrorReport) -> str:
    """Comparison table: one row per configuration, one column per method."""
    buf = io.StringIO()
    cols = ["config_id", "n_reps"] + [f"avg_err_{m}" for m in report.methods]
    buf.write(",".join(cols) + "\n")
    for g in report.groups:
        cells = [g.config_id, str(g.n_reps)]
        cells += [REPORT_FLOAT.format(g.results[m].average_error) for m in report.methods]
        buf.write(",".join(cells) + "\n")
    if report.groups:
        cells = ["pooled", ""]
        cells += [REPORT_FLOAT.format(report.pooled_average[m]) for m in report.methods]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def report_to_json(report: ErrorReport) -> str:
    """Full-precision per-joint report for machine consumption."""
    doc = {
        "methods": list(report.methods),
        "used_measured_impulse": report.used_measured_impulse,
        "per_rep": report.per_rep,
        "groups": [
            {
                "config_id": g.config_id,
                "n_reps": g.n_reps,
                "measured_jump": g.measured.tolist(),
                "pre_impact_contact_velocity": g.v_pre.tolist(),
                "restitution": g.restitution,
                "friction": g.friction,
                "methods": {
                    m: {
                        "prediction": r.prediction.tolist(),
                        "impulse": r.impulse.tolist(),
                        "error": r.error.tolist(),
                        "average_error": r.average_error,
                    }
                    for m, r in g.results.items()
                },
            }
            for g in report.groups
        ],
        "skipped": [{"config_id": s.config_id, "reason": s.reason} for s in report.skipped],
        "pooled_average_error": report.pooled_average,
        "reduction_percent_per_config": report.reduction_per_config,
        "reduction_percent_pooled": report.reduction_pooled,
    }
    return json.dumps(doc, indent=2) + "\n"
