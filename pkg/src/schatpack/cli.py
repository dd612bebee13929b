"""Experiment runner: build or load instances, run solvers and PCA
pipelines, validate certificates, and emit result tables.

Subcommands: solve-lp, solve-sdp, solve-boxed, pca-filter, pca-fast, sweep,
check. Each run writes ``results.csv`` (fixed column order: seed, n, d, eps,
verdict, score, iterations, wall_time) and ``summary.json`` (resolved config,
certificate-check booleans, invariant-violation counts) into the output
directory. ``check`` re-executes a finished run from the config embedded in
its summary and compares every results row except wall_time, which is the
only field allowed to differ between reruns.

Configuration precedence is flags > JSON config file > built-in defaults;
the default seed can also be set through the SCHATPACK_SEED environment
variable (lowest precedence). Exit codes: 0 success, 2 certificate or rerun
check failure, 1 usage error. ``--trace`` additionally writes the
per-iteration potential to ``trace.csv`` (solver runs) or the per-round
filter diagnostics (pca-filter).

Scores: solver rows carry the objective value of the returned point; PCA
rows carry u' Sigma u / lambda_max(Sigma) when the true covariance is known
(generated data or a sidecar sigma file) and are empty otherwise. For
boxed optimize runs and pca-fast the iterations column counts decide calls.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from typing import Optional

import numpy as np

from . import io as pkg_io
from .boxed import (
    BoxedConfig,
    boxed_schatten_decide,
    boxed_schatten_optimize,
    check_boxed_certificate,
    check_boxed_point,
)
from .datagen import (
    AdversaryStrategy,
    CorruptedDataset,
    make_corrupted_dataset,
    make_spiked_covariance,
)
from .errors import InvalidInputError, SchatpackError
from .packing_lp import check_lp_certificate, pnorm_packing_solve
from .packing_sdp import (
    MatrixInstance,
    check_sdp_certificate,
    schatten_packing_solve,
    validate_psd_instance,
)
from .robust import RobustPcaConfig, pca_filter, robust_pca_fast, weighted_covariance

_MONOTONE_REL_TOL = 1e-9


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _env_seed() -> int:
    raw = os.environ.get("SCHATPACK_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise _UsageError(f"SCHATPACK_SEED must be an integer, got {raw!r}") from None


def _parse_p(val):
    if isinstance(val, str):
        if val.lower() in ("inf", "infinity"):
            return math.inf
        try:
            val = float(val)
        except ValueError:
            raise _UsageError(f"p must be a number or 'inf', got {val!r}") from None
    if isinstance(val, float) and val == math.floor(val) and math.isfinite(val):
        return int(val)
    return val


def _parse_float_list(text: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise _UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_int_list(text: str):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise _UsageError(f"expected comma-separated integers, got {text!r}") from None


_GEN_SOLVER = {"n": 30, "d": 6, "form": "rank1"}
_GEN_DATASET = {
    "n": 2000,
    "d": 10,
    "top": 10.0,
    "rest": 1.0,
    "t": 1,
    "family": "gaussian",
    "adversary": {"kind": "direction-spike", "axis": 1, "magnitude": 15.0, "scale": 1.0},
}


def _defaults(task: str) -> dict:
    seed = _env_seed()
    base = {"task": task, "seed": seed, "out": "schatpack-out", "trace": False}
    if task == "solve-lp":
        base.update(instance=None, generate={"n": 40, "d": 8}, eps=0.1, p="inf")
    elif task == "solve-sdp":
        base.update(instance=None, generate=dict(_GEN_SOLVER), eps=0.1, p=3, mode="exact")
    elif task == "solve-boxed":
        base.update(
            instance=None, generate=dict(_GEN_SOLVER), eps=0.1, alpha=0.1, p=3,
            mode="decide", strategy="bisect", scale=1.0, descend_budget=20000,
        )
    elif task in ("pca-filter", "pca-fast"):
        base.update(
            dataset=None, generate=json.loads(json.dumps(_GEN_DATASET)), eps=0.05,
            delta=0.01, naive_baseline=False,
        )
        if task == "pca-fast":
            base.update(candidates=3, descend_budget=20000)
    elif task == "sweep":
        base.update(
            sweep_task="pca-fast", eps_values=[0.01, 0.02, 0.05], seeds=[0, 1, 2, 3, 4],
            generate=json.loads(json.dumps(_GEN_DATASET)), delta=0.01,
            naive_baseline=False, candidates=3, descend_budget=20000,
        )
    return base


def _merge_config(task: str, args) -> dict:
    cfg = _defaults(task)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise _UsageError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(loaded, dict):
            raise _UsageError(f"{args.config}: config must be a JSON object")
        for key, val in loaded.items():
            if key not in cfg:
                raise _UsageError(f"{args.config}: unknown field {key!r} for task {task}")
            if key in ("generate", "adversary") and isinstance(val, dict) and isinstance(cfg[key], dict):
                for sub, sval in val.items():
                    if sub not in cfg[key] and sub not in ("direction", "point"):
                        raise _UsageError(f"{args.config}: unknown field generate.{sub}")
                    cfg[key][sub] = sval
            else:
                cfg[key] = val

    flat = {
        "out": "out", "seed": "seed", "eps": "eps", "p": "p", "alpha": "alpha",
        "mode": "mode", "strategy": "strategy", "scale": "scale", "delta": "delta",
        "instance": "instance", "dataset": "dataset", "candidates": "candidates",
        "descend_budget": "descend_budget", "sweep_task": "sweep_task",
    }
    for attr, key in flat.items():
        val = getattr(args, attr, None)
        if val is not None and key in cfg:
            cfg[key] = val
    for attr in ("trace", "naive_baseline"):
        if getattr(args, attr, False) and attr in cfg:
            cfg[attr] = True
    if getattr(args, "eps_values", None) is not None and "eps_values" in cfg:
        cfg["eps_values"] = _parse_float_list(args.eps_values)
    if getattr(args, "seeds", None) is not None and "seeds" in cfg:
        cfg["seeds"] = _parse_int_list(args.seeds)
    if "generate" in cfg:
        gen = cfg["generate"]
        for attr in ("n", "d", "top", "rest", "spikes", "family", "form"):
            val = getattr(args, attr, None)
            if val is not None:
                gen["t" if attr == "spikes" else attr] = val
        adv = gen.get("adversary")
        if isinstance(adv, dict):
            for attr, key in (("adversary", "kind"), ("magnitude", "magnitude"),
                              ("axis", "axis"), ("adv_scale", "scale")):
                val = getattr(args, attr, None)
                if val is not None:
                    adv[key] = val
    if "p" in cfg:
        cfg["p"] = _parse_p(cfg["p"])
    for path_key in ("instance", "dataset"):
        if cfg.get(path_key):
            cfg[path_key] = os.path.abspath(cfg[path_key])
            if not os.path.exists(cfg[path_key]):
                raise _UsageError(f"{path_key} path does not exist: {cfg[path_key]}")
    return cfg


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def _monotone_violations(phi: np.ndarray) -> int:
    if phi is None or len(phi) < 2:
        return 0
    prev, nxt = phi[:-1], phi[1:]
    return int(np.sum(nxt > prev + _MONOTONE_REL_TOL * np.maximum(1.0, np.abs(prev))))


def _write_trace(out_dir: str, trace: np.ndarray, columns) -> None:
    path = os.path.join(out_dir, "trace.csv")
    with open(path, "w", newline="") as fh:
        fh.write("iteration," + ",".join(columns) + "\n")
        for i, row in enumerate(np.atleast_2d(trace)):
            fh.write(str(i) + "," + ",".join(f"{v:.17g}" for v in row) + "\n")


def _load_or_generate_lp(cfg) -> np.ndarray:
    if cfg.get("instance"):
        return pkg_io.read_lp_instance(cfg["instance"])
    gen = cfg["generate"]
    rng = np.random.default_rng(cfg["seed"])
    return rng.uniform(0.0, 1.0, size=(int(gen["d"]), int(gen["n"])))


def _load_or_generate_mats(cfg):
    if cfg.get("instance"):
        mats, tol = pkg_io.read_sdp_instance(cfg["instance"])
        validate_psd_instance(mats, psd_tol=tol)
        return mats
    gen = cfg["generate"]
    n, d = int(gen["n"]), int(gen["d"])
    rng = np.random.default_rng(cfg["seed"])
    if gen.get("form", "rank1") == "rank1":
        return rng.standard_normal((n, d)) / math.sqrt(d)
    b = rng.standard_normal((n, d, d))
    return np.einsum("nij,nkj->nik", b, b) / d


def _adversary_from_dict(adv: dict, d: int) -> AdversaryStrategy:
    kind = adv.get("kind", "none")
    if kind == "direction-spike":
        if "direction" in adv and adv["direction"] is not None:
            v = np.asarray(adv["direction"], dtype=np.float64)
        else:
            axis = int(adv.get("axis", 0))
            if not (0 <= axis < d):
                raise InvalidInputError(f"adversary axis {axis} out of range for d={d}")
            v = np.zeros(d)
            v[axis] = 1.0
        return AdversaryStrategy.direction_spike(v, float(adv.get("magnitude", 1.0)))
    if kind == "clustered-copies":
        if "point" in adv and adv["point"] is not None:
            return AdversaryStrategy.clustered_copies(np.asarray(adv["point"], dtype=np.float64))
        pt = np.zeros(d)
        pt[int(adv.get("axis", 0))] = float(adv.get("magnitude", 1.0))
        return AdversaryStrategy.clustered_copies(pt)
    if kind == "mirror-good":
        return AdversaryStrategy.mirror_good(float(adv.get("scale", 1.0)))
    if kind == "none":
        return AdversaryStrategy.none()
    raise InvalidInputError(f"unknown adversary kind {kind!r}")


def _load_or_generate_dataset(cfg, eps: float, seed: int) -> CorruptedDataset:
    if cfg.get("dataset"):
        return pkg_io.read_dataset(cfg["dataset"])
    gen = cfg["generate"]
    spec = make_spiked_covariance(
        int(gen["d"]), float(gen["top"]), float(gen["rest"]), int(gen.get("t", 1)),
        family=gen.get("family", "gaussian"),
    )
    strategy = _adversary_from_dict(gen.get("adversary", {"kind": "none"}), int(gen["d"]))
    return make_corrupted_dataset(spec, int(gen["n"]), eps, strategy, seed)


def _direction_score(direction: np.ndarray, covariance: Optional[np.ndarray]):
    if covariance is None:
        return ""
    lam_max = float(np.linalg.eigvalsh(covariance)[-1])
    if lam_max <= 0.0:
        return ""
    quad = float(direction @ covariance @ direction)
    return quad / lam_max


def _naive_direction(samples: np.ndarray) -> np.ndarray:
    n = samples.shape[0]
    cov = weighted_covariance(samples, np.full(n, 1.0 / n))
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, -1]


def _run_solver(cfg: dict, out_dir: str):
    task = cfg["task"]
    rows, certs = [], []
    t0 = time.perf_counter()
    if task == "solve-lp":
        a = _load_or_generate_lp(cfg)
        outcome = pnorm_packing_solve(a, cfg["eps"], cfg["p"], record_trace=True)
        wall = time.perf_counter() - t0
        report = check_lp_certificate(a, outcome)
        n_cols, d_rows = a.shape[1], a.shape[0]
        trace_cols = ("potential", "l1")
    elif task == "solve-sdp":
        mats = _load_or_generate_mats(cfg)
        outcome = schatten_packing_solve(
            mats, cfg["eps"], cfg["p"], mode=cfg["mode"], seed=cfg["seed"], record_trace=True
        )
        wall = time.perf_counter() - t0
        report = check_sdp_certificate(mats, outcome)
        inst = MatrixInstance.wrap(mats)
        n_cols, d_rows = inst.n, inst.d
        trace_cols = ("potential", "l1")
    else:
        mats = _load_or_generate_mats(cfg)
        inst = MatrixInstance.wrap(mats)
        n_cols, d_rows = inst.n, inst.d
        if cfg["mode"] == "optimize":
            result = boxed_schatten_optimize(
                mats, cfg["alpha"], cfg["eps"], cfg["p"], strategy=cfg["strategy"],
                descend_budget=cfg["descend_budget"] or None,
            )
            wall = time.perf_counter() - t0
            report = check_boxed_point(
                mats, result.x, cfg["alpha"], cfg["eps"], cfg["p"], scale=result.value
            )
            rows.append({
                "seed": cfg["seed"], "n": n_cols, "d": d_rows, "eps": cfg["eps"],
                "verdict": "optimized", "score": result.value,
                "iterations": result.decide_calls, "wall_time": wall,
            })
            certs.append({
                "row": 0, "verdict": "optimized", "ok": bool(report.ok),
                "kind": report.kind, "message": report.message,
                "floor_certified": result.floor_certified,
                "budget_hit": result.budget_hit,
            })
            if cfg["trace"]:
                print("note: trace covers decide mode only; no trace written", file=sys.stderr)
            summary_extra = {"monotone_violations": 0}
            return rows, certs, summary_extra, None, None
        scale = float(cfg.get("scale", 1.0))
        if scale <= 0.0:
            raise InvalidInputError(f"scale must be positive, got {scale}")
        scaled = mats / scale if inst.samples is None else mats / math.sqrt(scale)
        bcfg = BoxedConfig.create(inst.n, inst.d, cfg["alpha"], cfg["p"], cfg["eps"])
        outcome = boxed_schatten_decide(scaled, bcfg, record_trace=True)
        wall = time.perf_counter() - t0
        report = check_boxed_certificate(scaled, outcome, bcfg)
        trace_cols = ("potential", "l1", "norm_a", "norm_b")

    value = getattr(outcome, "value", None)
    rows.append({
        "seed": cfg["seed"], "n": n_cols, "d": d_rows, "eps": cfg["eps"],
        "verdict": outcome.verdict, "score": "" if value is None else value,
        "iterations": outcome.iterations, "wall_time": wall,
    })
    certs.append({
        "row": 0, "verdict": outcome.verdict, "ok": bool(report.ok),
        "kind": report.kind, "message": report.message,
    })
    phi = outcome.trace[:, 0] if outcome.trace is not None else None
    summary_extra = {"monotone_violations": _monotone_violations(phi)}
    return rows, certs, summary_extra, outcome.trace, trace_cols


def _pca_single(cfg: dict, task: str, eps: float, seed: int):
    """One PCA run; returns (rows, invariant dict)."""
    data = _load_or_generate_dataset(cfg, eps, seed)
    x = data.samples
    n, d = x.shape
    violations = {"weight_monotone": 0, "weight_bound": 0}
    t0 = time.perf_counter()
    if task == "pca-filter":
        res = pca_filter(x, eps, delta=cfg["delta"], seed=seed, record_trace=True)
        wall = time.perf_counter() - t0
        prev = None
        for entry in res.trace:
            w = entry.get("weights")
            if w is None:
                continue
            if prev is not None and np.any(w > prev + 1e-15):
                violations["weight_monotone"] += 1
            prev = w
        verdict = "ok" if res.terminated else "capped"
        iterations = res.iterations
        direction, weights = res.direction, res.weights
    else:
        rc = RobustPcaConfig(
            seed=seed, candidates=cfg.get("candidates", 3),
            descend_budget=cfg.get("descend_budget", 20000) or None, delta=cfg["delta"],
        )
        res = robust_pca_fast(x, eps, config=rc)
        wall = time.perf_counter() - t0
        kept = n - len(res.removed_tail)
        if kept > 0 and float(res.weights.max()) > 1.0 / ((1.0 - 2.0 * eps) * kept) + 1e-12:
            violations["weight_bound"] += 1
        if not res.power_converged:
            verdict = "partial"
        elif res.optimize.budget_hit:
            verdict = "budget"
        else:
            verdict = "ok"
        iterations = res.optimize.decide_calls
        direction, weights = res.direction, res.weights

    rows = [{
        "seed": seed, "n": n, "d": d, "eps": eps, "verdict": verdict,
        "score": _direction_score(direction, data.covariance),
        "iterations": iterations, "wall_time": wall,
    }]
    if cfg.get("naive_baseline"):
        t1 = time.perf_counter()
        u_naive = _naive_direction(x)
        rows.append({
            "seed": seed, "n": n, "d": d, "eps": eps, "verdict": "naive",
            "score": _direction_score(u_naive, data.covariance),
            "iterations": 0, "wall_time": time.perf_counter() - t1,
        })
    trace = res.trace if task == "pca-filter" else None
    return rows, violations, trace


def _write_filter_trace(out_dir: str, trace) -> None:
    path = os.path.join(out_dir, "trace.csv")
    with open(path, "w", newline="") as fh:
        fh.write("iteration,quad,sigma_robust,ratio,suffix_size\n")
        for entry in trace:
            if "quad" not in entry:
                continue
            suffix = entry.get("suffix_size", "")
            fh.write(
                f"{entry['iteration']},{entry['quad']:.17g},{entry['sigma_robust']:.17g},"
                f"{entry['ratio']:.17g},{suffix}\n"
            )


def _execute(cfg: dict) -> int:
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    task = cfg["task"]
    certs = []
    extra: dict = {}

    if task in ("solve-lp", "solve-sdp", "solve-boxed"):
        rows, certs, extra, trace, trace_cols = _run_solver(cfg, out_dir)
        if cfg["trace"] and trace is not None:
            _write_trace(out_dir, trace, trace_cols)
    elif task in ("pca-filter", "pca-fast"):
        rows, violations, trace = _pca_single(cfg, task, cfg["eps"], cfg["seed"])
        extra = {"invariant_violations": violations}
        if cfg["trace"] and trace is not None:
            _write_filter_trace(out_dir, trace)
    elif task == "sweep":
        sub = cfg["sweep_task"]
        if sub not in ("pca-filter", "pca-fast"):
            raise _UsageError(f"sweep_task must be pca-filter or pca-fast, got {sub!r}")
        rows = []
        totals = {"weight_monotone": 0, "weight_bound": 0}
        for eps in sorted(cfg["eps_values"]):
            for seed in sorted(cfg["seeds"]):
                sub_rows, violations, _ = _pca_single(cfg, sub, eps, seed)
                rows.extend(sub_rows)
                for key, cnt in violations.items():
                    totals[key] += cnt
        extra = {"invariant_violations": totals}
        if cfg["trace"]:
            print("note: sweep runs do not write traces", file=sys.stderr)
    else:
        raise _UsageError(f"unknown task {task!r}")

    cert_failures = sum(
        1 for c in certs if c["verdict"] in ("primal", "dual", "infeasible", "optimized") and not c["ok"]
    )
    pkg_io.write_results_csv(os.path.join(out_dir, "results.csv"), rows)
    summary = {
        "task": task,
        "config": _json_safe(cfg),
        "rows": len(rows),
        "certificates": _json_safe(certs),
        "certificate_failures": cert_failures,
        "all_ok": cert_failures == 0,
    }
    summary.update(_json_safe(extra))
    pkg_io.write_summary_json(os.path.join(out_dir, "summary.json"), summary)
    for c in certs:
        status = "pass" if c["ok"] else "FAIL"
        print(f"{task} row {c['row']}: verdict={c['verdict']} certificate={status}")
    if task == "sweep":
        print(f"sweep wrote {len(rows)} rows to {os.path.join(out_dir, 'results.csv')}")
    return 2 if cert_failures else 0


def _run_check(path: str) -> int:
    if os.path.isdir(path):
        summary_path = os.path.join(path, "summary.json")
    else:
        summary_path = path
    if not os.path.isfile(summary_path):
        raise _UsageError(f"no summary.json at {summary_path}")
    summary = pkg_io.read_json(summary_path)
    cfg = summary.get("config")
    if not isinstance(cfg, dict) or "task" not in cfg:
        raise _UsageError(f"{summary_path} does not embed a runnable config")
    if "p" in cfg:
        cfg["p"] = _parse_p(cfg["p"])
    results_path = os.path.join(os.path.dirname(summary_path) or ".", "results.csv")
    original = pkg_io.read_results_csv(results_path)

    with tempfile.TemporaryDirectory() as tmp:
        rerun_cfg = dict(cfg, out=tmp, trace=False)
        code = _execute(rerun_cfg)
        rerun = pkg_io.read_results_csv(os.path.join(tmp, "results.csv"))

    mismatches = 0
    if len(original) != len(rerun):
        print(f"check: row count differs ({len(original)} vs {len(rerun)})")
        mismatches += abs(len(original) - len(rerun))
    compare_cols = [c for c in pkg_io.RESULT_COLUMNS if c != "wall_time"]
    for i, (old, new) in enumerate(zip(original, rerun)):
        diffs = [c for c in compare_cols if old.get(c) != new.get(c)]
        if diffs:
            mismatches += 1
            for c in diffs:
                print(f"check: row {i} column {c}: {old.get(c)!r} != {new.get(c)!r}")
    if mismatches == 0 and code == 0:
        print(f"check: {len(original)} rows reproduced exactly (wall_time excluded)")
        return 0
    if code != 0:
        print("check: rerun reported certificate failures")
    return 2


def _add_common(sp) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its fields")
    sp.add_argument("--out", help="output directory (default schatpack-out)")
    sp.add_argument("--seed", type=int, help="RNG seed (default $SCHATPACK_SEED or 0)")
    sp.add_argument("--trace", action="store_true", help="also write per-iteration trace.csv")


def _add_generator_matrix(sp) -> None:
    sp.add_argument("--n", type=int, help="generated instance: number of matrices/columns")
    sp.add_argument("--d", type=int, help="generated instance: dimension")


def _add_generator_dataset(sp) -> None:
    sp.add_argument("--n", type=int, help="generated dataset: sample count")
    sp.add_argument("--d", type=int, help="generated dataset: dimension")
    sp.add_argument("--top", type=float, help="top covariance eigenvalue")
    sp.add_argument("--rest", type=float, help="bulk covariance eigenvalue")
    sp.add_argument("--spikes", type=int, help="multiplicity of the top eigenvalue")
    sp.add_argument("--family", choices=["gaussian", "bounded-rademacher-mixture"])
    sp.add_argument("--adversary", choices=["direction-spike", "clustered-copies", "mirror-good", "none"])
    sp.add_argument("--magnitude", type=float, help="adversary spike magnitude")
    sp.add_argument("--axis", type=int, help="adversary spike axis")
    sp.add_argument("--adv-scale", dest="adv_scale", type=float, help="mirror-good scale")
    sp.add_argument("--naive-baseline", dest="naive_baseline", action="store_true",
                    help="also emit a naive top-eigenvector row per run")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="schatpack",
        description="Width-independent packing solvers and robust PCA pipelines.",
        epilog="Exit codes: 0 ok, 2 certificate/check failure, 1 usage error. "
               "SCHATPACK_SEED sets the default seed; SCHATPACK_BACKEND selects "
               "the numba or numpy kernels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve-lp", help="packing LP over the simplex")
    _add_common(sp)
    sp.add_argument("--instance", help="LP instance CSV (header 'd,n')")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--p", help="norm order: a number >= 2 or 'inf' (default)")
    _add_generator_matrix(sp)

    sp = sub.add_parser("solve-sdp", help="Schatten packing over PSD matrices")
    _add_common(sp)
    sp.add_argument("--instance", help="SDP instance directory (manifest.json + matrices)")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--p", help="odd integer >= 3 (default 3)")
    sp.add_argument("--mode", choices=["exact", "sketched"])
    _add_generator_matrix(sp)
    sp.add_argument("--form", choices=["rank1", "dense"], help="generated instance form")

    sp = sub.add_parser("solve-boxed", help="boxed Schatten decision / optimization")
    _add_common(sp)
    sp.add_argument("--instance", help="SDP instance directory")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--alpha", type=float, help="box slack (default 0.1)")
    sp.add_argument("--p", help="odd integer >= 3 (default 3)")
    sp.add_argument("--mode", choices=["decide", "optimize"])
    sp.add_argument("--strategy", choices=["bisect", "descend"], help="optimize mode strategy")
    sp.add_argument("--scale", type=float, help="decide mode: norm threshold scale (default 1)")
    sp.add_argument("--descend-budget", dest="descend_budget", type=int,
                    help="iteration budget per descend probe (0 disables)")
    _add_generator_matrix(sp)
    sp.add_argument("--form", choices=["rank1", "dense"], help="generated instance form")

    sp = sub.add_parser("pca-filter", help="robust PCA by iterative filtering")
    _add_common(sp)
    sp.add_argument("--dataset", help="dataset CSV with JSON sidecar")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--delta", type=float)
    _add_generator_dataset(sp)

    sp = sub.add_parser("pca-fast", help="robust PCA via boxed Schatten weights")
    _add_common(sp)
    sp.add_argument("--dataset", help="dataset CSV with JSON sidecar")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--candidates", type=int, help="power-iteration candidate count")
    sp.add_argument("--descend-budget", dest="descend_budget", type=int)
    _add_generator_dataset(sp)

    sp = sub.add_parser("sweep", help="grid of PCA runs over eps values and seeds")
    _add_common(sp)
    sp.add_argument("--task", dest="sweep_task", choices=["pca-filter", "pca-fast"])
    sp.add_argument("--eps-values", dest="eps_values", help="comma-separated eps grid")
    sp.add_argument("--seeds", help="comma-separated seed list")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--candidates", type=int)
    sp.add_argument("--descend-budget", dest="descend_budget", type=int)
    _add_generator_dataset(sp)

    sp = sub.add_parser("check", help="re-run a finished experiment and compare results")
    sp.add_argument("path", help="output directory or summary.json of the run to verify")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "check":
            return _run_check(args.path)
        cfg = _merge_config(args.command, args)
        return _execute(cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SchatpackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
