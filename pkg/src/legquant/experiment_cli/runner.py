"""Execute an experiment config and persist results, report and plot tables.

Result files
------------
``results.csv``
    experiment_id, probe_id, varpi, k, value_re, value_im, predicted_re,
    predicted_im, status.  ``varpi`` is the integer vector joined by ``;``
    (empty without an action).  Floats use Python's shortest round-trip repr;
    an empty predicted field means no leading term (no return elements).
``results.jsonl``
    The same records plus ``point`` and ``w_norm``, one JSON object per line.
``report.md``
    Human readable check summary.
``manifest.json``
    schema version, config hash, package version and SHA-256 of each file.
``timings.json``
    Wall-clock seconds per task.  Kept apart so the files above are
    bit-identical across reruns.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..asymptotic_lab import (
    LeadingTermPrediction,
    fit_power_law,
    predict_action_free,
    predict_pairing_transverse,
    predict_theorem_main,
    rapid_decay_test,
)
from ..errors import ConfigError, LegquantError
from ..legendrian import ReturnElement, find_return_elements, tangent_vectors, transversality_check
from ..model_geometry import HeisenbergChart, adapted_chart, displace, heisenberg_chart
from ..szego_states import (
    StateSequence,
    _legendrian_nodes,
    _u_from_nodes,
    group_node_count,
    node_count,
    pairing_sequence,
    u_k_varpi_sequence,
)
from .config import SCHEMA_VERSION, ExperimentConfig, KRange, Probe

log = logging.getLogger(__name__)

THREADS_ENV = "LEGQ_THREADS"
CSV_COLUMNS = [
    "experiment_id",
    "probe_id",
    "varpi",
    "k",
    "value_re",
    "value_im",
    "predicted_re",
    "predicted_im",
    "status",
]
PLOT_KINDS = ("growth", "profile", "pairing", "decay")


@dataclass(frozen=True)
class ResultRecord:
    experiment_id: str
    probe_id: str
    varpi: tuple[int, ...]
    k: int
    value: complex
    predicted: complex | None
    status: str = "ok"
    point: tuple = ()
    w_norm: float = 0.0

    def row(self) -> dict:
        nan = float("nan")
        v = self.value if self.value is not None else complex(nan, nan)
        return {
            "experiment_id": self.experiment_id,
            "probe_id": self.probe_id,
            "varpi": ";".join(str(int(c)) for c in self.varpi),
            "k": int(self.k),
            "value_re": float(v.real),
            "value_im": float(v.imag),
            "predicted_re": None if self.predicted is None else float(self.predicted.real),
            "predicted_im": None if self.predicted is None else float(self.predicted.imag),
            "status": self.status,
        }


@dataclass(frozen=True)
class CheckResult:
    name: str
    probe_id: str
    varpi: tuple[int, ...]
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)


@dataclass
class ResultSet:
    config: ExperimentConfig
    records: list[ResultRecord]
    checks: list[CheckResult]
    fits: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------- caching


class SequenceCache:
    """Per-(probe, varpi, k) memo on disk, keyed by the inputs that fix the values."""

    def __init__(self, root: Path | None):
        self.root = root
        if root is not None:
            root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(payload: dict) -> str:
        canon = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:24]

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.npz"

    def get(self, key: str) -> dict[int, complex]:
        if self.root is None or not self._path(key).exists():
            return {}
        with np.load(self._path(key)) as z:
            return {int(k): complex(v) for k, v in zip(z["ks"], z["values"])}

    def put(self, key: str, table: dict[int, complex]) -> None:
        if self.root is None:
            return
        ks = np.array(sorted(table), dtype=int)
        tmp = self._path(key).with_suffix(".tmp.npz")
        np.savez(tmp, ks=ks, values=np.array([table[k] for k in ks], dtype=complex))
        os.replace(tmp, self._path(key))


def _cached(cache: SequenceCache, payload: dict, ks: np.ndarray, compute) -> np.ndarray:
    key = cache.key(payload)
    table = cache.get(key)
    missing = np.array([k for k in ks if int(k) not in table], dtype=int)
    if len(missing):
        vals = compute(missing)
        table.update({int(k): complex(v) for k, v in zip(missing, vals)})
        cache.put(key, table)
    return np.array([table[int(k)] for k in ks], dtype=complex)


# ---------------------------------------------------------------- tasks


def _restrict(kr: KRange, k_min: int | None, k_max: int | None) -> np.ndarray:
    ks = kr.values()
    if k_min is not None:
        ks = ks[ks >= k_min]
    if k_max is not None:
        ks = ks[ks <= k_max]
    return ks


def _probe_chart(probe: Probe, L, action, elements: list[ReturnElement]) -> HeisenbergChart:
    if probe.chart == "standard":
        return heisenberg_chart(probe.point)
    if not elements:
        raise ConfigError(f"probe {probe.id}: an adapted chart needs the probe on the orbit of Lambda")
    e = elements[0]
    J = tangent_vectors(L, e.t_params)
    back = np.conj(e.h) * (action.act(-e.g_params, J.T).T if action is not None else J)
    return adapted_chart(probe.point, back)


def _state_values(cfg, L, probe, varpi, ks, chart, nodes, group_nodes) -> np.ndarray:
    act = cfg.action
    if probe.w is None:
        if act is None:
            nd = _legendrian_nodes(L, nodes)
            return _u_from_nodes(ks, nd, probe.point.coords[None, :], L.n)[:, 0]
        return u_k_varpi_sequence(L, act, varpi, ks, probe.point, nodes, group_nodes).values
    out = np.zeros(len(ks), dtype=complex)
    nd = _legendrian_nodes(L, nodes) if act is None else None
    for i, k in enumerate(ks):
        y = displace(chart, probe.w, int(k))
        if act is None:
            out[i] = _u_from_nodes([k], nd, y.coords[None, :], L.n)[0, 0]
        else:
            out[i] = u_k_varpi_sequence(L, act, varpi, [k], y, nodes, group_nodes).values[0]
    return out


def _check_fit(tol: dict, seq: StateSequence, pred: LeadingTermPrediction | None, probe_id, varpi):
    pattern = tol.get("phase_pattern", "auto")
    kw = {"correction": tol.get("correction")}
    if pattern == "auto":
        pp = None
    elif pattern == "prediction":
        if pred is None:
            return None, CheckResult("fit", probe_id, varpi, False, "no prediction to divide out")
        pp = pred.coefficient
    elif pattern == "interference":
        if pred is None:
            return None, CheckResult("fit", probe_id, varpi, False, "no prediction to divide out")
        unit = [t.amplitude / abs(t.amplitude) if abs(t.amplitude) else 0 for t in pred.terms]

        def pp(k):
            return sum(u * t.base**k for u, t in zip(unit, pred.terms))
    else:
        pp = int(pattern)
    try:
        fit = fit_power_law(seq, pp, **kw)
    except (LegquantError, ValueError) as exc:
        return None, CheckResult("fit", probe_id, varpi, False, f"fit failed: {exc}")
    ok, parts = True, [f"kind={fit.kind}", f"exponent={fit.exponent:.6g}", f"coefficient={fit.coefficient_modulus:.6g}"]
    if "expected_exponent" in tol:
        good = abs(fit.exponent - tol["expected_exponent"]) <= tol.get("exponent_tol", 0.05)
        ok &= bool(good)
        parts.append(f"expected exponent {tol['expected_exponent']} +- {tol.get('exponent_tol', 0.05)}")
    if "expected_coefficient" in tol:
        ref = tol["expected_coefficient"]
        good = abs(fit.coefficient_modulus / ref - 1) <= tol.get("coefficient_rtol", 0.05)
        ok &= bool(good)
        parts.append(f"expected coefficient {ref:.6g} rtol {tol.get('coefficient_rtol', 0.05)}")
    metrics = {"exponent": fit.exponent, "coefficient": fit.coefficient_modulus, "period": fit.period}
    return fit, CheckResult("fit", probe_id, varpi, ok, ", ".join(parts), metrics)


def compare_to_prediction(
    seq: StateSequence,
    pred: LeadingTermPrediction,
    rtol: float,
    min_pattern: float = 0.1,
    k_min: int | None = None,
) -> tuple[bool, dict]:
    """Relative agreement of moduli where the predicted sum is large.

    The scale of one return term, prefactor * k^exponent * max|amplitude|, sets
    the cancellation threshold.  Where the terms nearly cancel, |u - prediction|
    must stay below ``rtol`` times that scale.  Levels below ``k_min`` are
    ignored.
    """
    if k_min is not None:
        seq = seq.select(seq.ks >= k_min)
    ks = seq.ks
    p = np.asarray(pred.value(ks), dtype=complex)
    amp = max((abs(t.amplitude) for t in pred.terms), default=0.0)
    scale = abs(pred.prefactor) * ks.astype(float) ** pred.exponent * amp
    big = np.abs(p) >= min_pattern * scale
    rel = np.abs(np.abs(seq.values[big]) / np.abs(p[big]) - 1.0)
    small = np.abs(seq.values[~big] - p[~big]) / scale[~big]
    max_rel = float(np.max(rel, initial=0.0))
    max_small = float(np.max(small, initial=0.0))
    ok = max_rel <= rtol and max_small <= rtol
    return bool(ok), {"max_rel_error": max_rel, "max_cancelled": max_small, "n_big": int(big.sum())}


def _state_task(cfg: ExperimentConfig, probe: Probe, varpi, ctx: dict):
    L, act = ctx["L"], cfg.action
    ks = _restrict(probe.k_range or cfg.k_range, ctx["k_min"], ctx["k_max"])
    vp = tuple(varpi)
    recs, checks, fits = [], [], {}
    base = dict(experiment_id=cfg.id, probe_id=probe.id, varpi=vp,
                point=tuple((float(c.real), float(c.imag)) for c in probe.point.coords),
                w_norm=float(np.linalg.norm(probe.w)) if probe.w is not None else 0.0)
    try:
        elements = find_return_elements(probe.point, L, act)
        chart = _probe_chart(probe, L, act, elements)
        pred = None
        if elements:
            if act is None:
                pred = predict_action_free(probe.point, L, probe.w, chart, elements)
            else:
                pred = predict_theorem_main(probe.point, L, act, list(vp), probe.w, chart, elements)
        payload = {
            "legendrian": cfg.legendrian, "action": cfg.raw.get("action"), "n": cfg.n,
            "point": base["point"], "w": None if probe.w is None else [str(c) for c in probe.w],
            "chart": probe.chart, "varpi": vp, "nodes": ctx["nodes"], "group_nodes": ctx["group_nodes"],
        }
        vals = _cached(ctx["cache"], payload, ks, lambda m: _state_values(
            cfg, L, probe, list(vp), m, chart, ctx["nodes"], ctx["group_nodes"]))
    except LegquantError as exc:
        msg = f"error: {type(exc).__name__}: {exc}"
        recs = [ResultRecord(value=None, predicted=None, k=int(k), status=msg, **base) for k in ks]
        checks.append(CheckResult("run", probe.id, vp, False, msg))
        return recs, checks, fits
    pv = pred.value(ks) if pred is not None else [None] * len(ks)
    recs = [ResultRecord(value=complex(v), predicted=None if p is None else complex(p), k=int(k), **base)
            for k, v, p in zip(ks, vals, pv)]
    seq = StateSequence(ks, vals)
    tol = cfg.tolerances
    for name in probe.checks:
        if name == "fit":
            fit, chk = _check_fit(tol.get("fit", {}), seq, pred, probe.id, vp)
            if fit is not None:
                fits[(probe.id, vp)] = fit
            checks.append(chk)
        elif name == "compare":
            if pred is None:
                checks.append(CheckResult("compare", probe.id, vp, False, "probe has no return elements"))
                continue
            ct = tol.get("compare", {})
            ok, m = compare_to_prediction(
                seq, pred, ct.get("rtol", 0.05), ct.get("min_pattern", 0.1), ct.get("k_min")
            )
            detail = (f"{len(pred.terms)} return terms; max relative error {m['max_rel_error']:.3e} on "
                      f"{m['n_big']} levels; cancelled levels at {m['max_cancelled']:.3e} of one term "
                      f"(rtol {ct.get('rtol', 0.05)})")
            checks.append(CheckResult("compare", probe.id, vp, ok, detail, m))
        elif name == "decay":
            dt = tol.get("decay", {})
            rep = rapid_decay_test(seq, dt.get("N_max", 5), dt.get("threshold", 1e-6))
            worst = max(v["final"] for v in rep.per_order.values())
            detail = f"{len(elements)} return elements; largest final |u| k^N = {worst:.3e}"
            checks.append(CheckResult("decay", probe.id, vp, rep.passed, detail, {"final_max": worst}))
    return recs, checks, fits


def _pairing_task(cfg: ExperimentConfig, varpi, ctx: dict):
    L, S, act = ctx["L"], ctx["Sigma"], cfg.action
    ks = _restrict(cfg.k_range, ctx["k_min"], ctx["k_max"])
    vp = tuple(varpi)
    base = dict(experiment_id=cfg.id, probe_id="pairing", varpi=vp)
    checks, fits = [], {}
    try:
        pred = predict_pairing_transverse(L, S, act, list(vp) if act is not None else None)
        payload = {"legendrian": cfg.legendrian, "sigma": cfg.sigma, "action": cfg.raw.get("action"),
                   "varpi": vp, "nodes": ctx["nodes"], "group_nodes": ctx["group_nodes"], "kind": "pairing"}
        vals = _cached(ctx["cache"], payload, ks,
                       lambda m: pairing_sequence(L, S, m, act, list(vp) if act else None, ctx["nodes"],
                                                  ctx["group_nodes"]).values)
    except LegquantError as exc:
        msg = f"error: {type(exc).__name__}: {exc}"
        checks.append(CheckResult("run", "pairing", vp, False, msg))
        return [ResultRecord(value=None, predicted=None, k=int(k), status=msg, **base) for k in ks], checks, fits
    pv = pred.value(ks)
    recs = [ResultRecord(value=complex(v), predicted=complex(p), k=int(k), **base) for k, v, p in zip(ks, vals, pv)]
    seq = StateSequence(ks, vals)
    fit, chk = _check_fit(cfg.tolerances.get("fit", {"phase_pattern": "prediction"}), seq, pred, "pairing", vp)
    if fit is not None:
        fits[("pairing", vp)] = fit
    checks.append(chk)
    ct = cfg.tolerances.get("compare", {})
    ok, m = compare_to_prediction(seq, pred, ct.get("rtol", 0.1), ct.get("min_pattern", 0.1), ct.get("k_min"))
    detail = (f"{len(pred.terms)} crossings; max relative error {m['max_rel_error']:.3e} on {m['n_big']} "
              f"levels; cancelled levels at {m['max_cancelled']:.3e} of one term (rtol {ct.get('rtol', 0.1)})")
    checks.append(CheckResult("compare", "pairing", vp, ok, detail, m))
    return recs, checks, fits


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run(
    cfg: ExperimentConfig,
    threads: int | None = None,
    k_min: int | None = None,
    k_max: int | None = None,
    cache_dir: Path | None = None,
) -> ResultSet:
    """Run every (probe, varpi) task of ``cfg``; module errors become failure records."""
    threads = threads or default_threads()
    L = cfg.build_legendrian()
    d = L.dim
    all_k = [cfg.k_range.values()] + [p.k_range.values() for p in cfg.probes if p.k_range]
    kmax = int(max(int(ks.max()) for ks in all_k))
    g = cfg.action.g if cfg.action is not None else 0
    ctx = {
        "L": L,
        "Sigma": cfg.build_legendrian(cfg.sigma) if cfg.sigma else None,
        "k_min": k_min,
        "k_max": k_max,
        "nodes": cfg.quadrature.get("nodes", node_count(kmax, d)),
        "group_nodes": cfg.quadrature.get(
            "group_nodes",
            group_node_count(kmax, cfg.action, cfg.varpi_list) if g else node_count(kmax, 1),
        ),
        "cache": SequenceCache(cache_dir),
    }
    checks: list[CheckResult] = []
    if cfg.action is not None:
        rep = transversality_check(L, cfg.action)
        detail = f"{len(rep.points)} sampled points of Lambda', dimension {rep.dimension}"
        if rep.failures:
            detail += f"; {len(rep.failures)} failures, first: {rep.failures[0][1]}"
        checks.append(CheckResult("transversality", "-", (), rep.ok, detail))

    if cfg.kind == "pairing":
        tasks = [("pairing", vp) for vp in cfg.varpi_list]
    else:
        tasks = [(p, vp) for p in cfg.probes for vp in cfg.varpi_list]

    def work(task):
        t0 = time.perf_counter()
        probe, vp = task
        out = _pairing_task(cfg, vp, ctx) if probe == "pairing" else _state_task(cfg, probe, vp, ctx)
        return out, time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=threads) as pool:
        outs = list(pool.map(work, tasks))
    records, fits, timings = [], {}, {}
    for (probe, vp), ((recs, chks, fts), dt) in zip(tasks, outs):
        records += recs
        checks += chks
        fits.update(fts)
        pid = probe if isinstance(probe, str) else probe.id
        timings[f"{pid}|{';'.join(map(str, vp))}"] = dt
    return ResultSet(cfg, records, checks, fits, timings)


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def render_report(rs: ResultSet) -> str:
    cfg = rs.config
    lines = [f"# Experiment {cfg.id}", ""]
    if cfg.raw.get("description"):
        lines += [cfg.raw["description"].strip(), ""]
    lines += [
        f"- config hash: `{cfg.config_hash}`",
        f"- kind: {cfg.kind}",
        f"- records: {len(rs.records)}",
        f"- overall: {'PASS' if rs.passed else 'FAIL'}",
        "",
        "| check | probe | varpi | result | detail |",
        "|---|---|---|---|---|",
    ]
    for c in rs.checks:
        vp = ";".join(map(str, c.varpi)) or "-"
        lines.append(f"| {c.name} | {c.probe_id} | {vp} | {'PASS' if c.passed else 'FAIL'} | {c.detail} |")
    if rs.fits:
        lines += ["", "## Fits", "", "| probe | varpi | kind | exponent | coefficient | period | levels |",
                  "|---|---|---|---|---|---|---|"]
        for (pid, vp), f in sorted(rs.fits.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            lines.append(
                f"| {pid} | {';'.join(map(str, vp)) or '-'} | {f.kind} | {f.exponent:.6f} | "
                f"{f.coefficient_modulus:.6f} | {f.period if f.period is not None else '-'} | {len(f.subsequence)} |"
            )
    return "\n".join(lines) + "\n"


def write_results(rs: ResultSet, out_dir: Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / name for name in ("results.csv", "results.jsonl", "report.md")}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rs.records:
        row = r.row()
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    paths["results.csv"].write_text(buf.getvalue())
    with paths["results.jsonl"].open("w") as fh:
        for r in rs.records:
            row = r.row()
            row["point"] = [list(c) for c in r.point]
            row["w_norm"] = r.w_norm
            fh.write(json.dumps(row, allow_nan=True) + "\n")
    paths["report.md"].write_text(render_report(rs))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment_id": rs.config.id,
        "config_hash": rs.config.config_hash,
        "config": rs.config.raw,
        "package_version": __version__,
        "kernel_normalization": {
            "model": rs.config.raw.get("model", {}).get("kernel", "sphere-unit-pi"),
            "volume": "euclidean surface measure on the unit sphere divided by 2 pi",
            "kernel": "(k + n)! / (k! pi^n) <x, y>^k",
            "haar": "unit mass on the torus",
        },
        "passed": rs.passed,
        "files": {n: _sha(p) for n, p in sorted(paths.items())},
    }
    paths["manifest.json"] = out_dir / "manifest.json"
    paths["manifest.json"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths["timings.json"] = out_dir / "timings.json"
    paths["timings.json"].write_text(json.dumps(rs.timings, indent=2, sort_keys=True) + "\n")
    return paths


def load_records(result_dir: Path) -> list[dict]:
    p = Path(result_dir) / "results.jsonl"
    if not p.exists():
        raise ConfigError(f"no results.jsonl in {result_dir}")
    return [json.loads(line) for line in p.read_text().splitlines() if line.strip()]


def _c(row, pre) -> complex | None:
    re, im = row[f"{pre}_re"], row[f"{pre}_im"]
    if re is None or (isinstance(re, float) and math.isnan(re)):
        return None
    return complex(re, im)


def emit_plot_data(source: ResultSet | Path | str, kind: str, out_dir: Path | str) -> list[Path]:
    """Write plot tables of one kind; returns the files written.

    growth:  k, abs_value, abs_predicted, ratio               (one file per probe and varpi)
    profile: probe_id, w_norm, k, ratio, predicted_ratio      (ratios against the w = 0 probe at the same point)
    pairing: k, value_re, value_im, abs_value, abs_predicted, ratio
    decay:   k, abs_value, abs_value_k5
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    if isinstance(source, ResultSet):
        rows = []
        for r in source.records:
            row = r.row()
            row["point"] = [list(c) for c in r.point]
            row["w_norm"] = r.w_norm
            rows.append(row)
    else:
        rows = load_records(Path(source))
    rows = [r for r in rows if r["status"] == "ok"]
    if not rows:
        raise ConfigError("result set has no successful records")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["probe_id"], r["varpi"]), []).append(r)
    written = []

    def dump(name, header, table):
        path = out_dir / name
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for line in table:
            w.writerow([_fmt(x) for x in line])
        path.write_text(buf.getvalue())
        written.append(path)

    def tag(pid, vp):
        return f"{pid}" + (f"_varpi{vp.replace(';', '_')}" if vp else "")

    if kind in ("growth", "decay", "pairing"):
        for (pid, vp), rs in sorted(groups.items()):
            if (kind == "pairing") != (pid == "pairing"):
                continue
            table = []
            for r in sorted(rs, key=lambda r: r["k"]):
                v, p = _c(r, "value"), _c(r, "predicted")
                ratio = abs(v) / abs(p) if p is not None and abs(p) > 0 else None
                if kind == "growth":
                    table.append([r["k"], abs(v), None if p is None else abs(p), ratio])
                elif kind == "decay":
                    table.append([r["k"], abs(v), abs(v) * float(r["k"]) ** 5])
                else:
                    table.append([r["k"], v.real, v.imag, abs(v), None if p is None else abs(p), ratio])
            header = {
                "growth": ["k", "abs_value", "abs_predicted", "ratio"],
                "decay": ["k", "abs_value", "abs_value_k5"],
                "pairing": ["k", "value_re", "value_im", "abs_value", "abs_predicted", "ratio"],
            }[kind]
            dump(f"{kind}-{tag(pid, vp)}.csv", header, table)
    else:
        by_point: dict[tuple, list[dict]] = {}
        for r in rows:
            by_point.setdefault((json.dumps(r["point"]), r["varpi"]), []).append(r)
        for (pt, vp), rs in sorted(by_point.items()):
            base = {r["k"]: r for r in rs if r["w_norm"] == 0.0}
            base_id = min((r["probe_id"] for r in base.values()), default=None)
            table = []
            for r in sorted(rs, key=lambda r: (r["w_norm"], r["probe_id"], r["k"])):
                b = base.get(r["k"])
                if r["w_norm"] == 0.0 or b is None:
                    continue
                v, p, v0, p0 = _c(r, "value"), _c(r, "predicted"), _c(b, "value"), _c(b, "predicted")
                ratio = abs(v) / abs(v0) if abs(v0) > 0 else None
                pratio = abs(p) / abs(p0) if p is not None and p0 is not None and abs(p0) > 0 else None
                table.append([r["probe_id"], r["w_norm"], r["k"], ratio, pratio])
            if table:
                dump(f"profile-{tag(base_id, vp)}.csv",
                     ["probe_id", "w_norm", "k", "ratio", "predicted_ratio"], table)
    if not written:
        raise ConfigError(f"result set has no data for plot kind {kind!r}")
    return written
