"""File formats for instances, datasets, and result tables.

All floats are serialized with 17 significant digits so a parse-and-rewrite
round trip is bit-exact, which the rerun checker relies on. Column and key
orders are fixed:

* packing LP instance: CSV, first line ``d,n``, then d rows of n entries.
* Schatten SDP instance: a directory of d x d CSV matrices named
  ``matrix_<i>.csv`` plus ``manifest.json`` with {n, d, psd_tolerance}.
* dataset: CSV with n rows and d columns, plus a JSON sidecar
  {n, d, eps, seed, bad_indices, sigma_file} holding evaluation-only truth.
* results: CSV with header ``seed,n,d,eps,verdict,score,iterations,wall_time``.
* summary: JSON with sorted keys.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Optional

import numpy as np

from .datagen import CorruptedDataset
from .errors import InvalidInputError

__all__ = [
    "RESULT_COLUMNS",
    "write_lp_instance",
    "read_lp_instance",
    "write_sdp_instance",
    "read_sdp_instance",
    "write_dataset",
    "read_dataset",
    "write_results_csv",
    "read_results_csv",
    "write_summary_json",
    "read_json",
]

RESULT_COLUMNS = ("seed", "n", "d", "eps", "verdict", "score", "iterations", "wall_time")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_matrix(path: str, mat: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        for row in np.atleast_2d(mat):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _read_matrix(path: str) -> np.ndarray:
    out = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if out.size == 0:
        raise InvalidInputError(f"{path} holds no numeric data")
    return out


def write_lp_instance(path: str, a) -> None:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"LP matrix must be 2d, got shape {a.shape}")
    d, n = a.shape
    with open(path, "w", newline="") as fh:
        fh.write(f"{d},{n}\n")
        for row in a:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_lp_instance(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        try:
            d, n = (int(tok) for tok in header.split(","))
        except ValueError:
            raise InvalidInputError(f"{path}: first line must be 'd,n', got {header!r}") from None
        a = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    if a.shape != (d, n):
        raise InvalidInputError(f"{path}: header promises shape ({d}, {n}), body has {a.shape}")
    return a


def write_sdp_instance(dirpath: str, mats, psd_tolerance: float = 1e-8) -> None:
    mats = np.asarray(mats, dtype=np.float64)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise InvalidInputError(f"need a stack of square matrices, got shape {mats.shape}")
    n, d = mats.shape[0], mats.shape[1]
    os.makedirs(dirpath, exist_ok=True)
    for i, m in enumerate(mats):
        _write_matrix(os.path.join(dirpath, f"matrix_{i:06d}.csv"), m)
    manifest = {"n": n, "d": d, "psd_tolerance": psd_tolerance}
    with open(os.path.join(dirpath, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sdp_instance(dirpath: str):
    """Returns (mats, psd_tolerance) with mats of shape (n, d, d)."""
    manifest_path = os.path.join(dirpath, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise InvalidInputError(f"{dirpath} has no manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    try:
        n, d = int(manifest["n"]), int(manifest["d"])
        tol = float(manifest.get("psd_tolerance", 1e-8))
    except (KeyError, TypeError, ValueError):
        raise InvalidInputError(f"{manifest_path} must define integer n, d") from None
    mats = np.empty((n, d, d), dtype=np.float64)
    for i in range(n):
        mat_path = os.path.join(dirpath, f"matrix_{i:06d}.csv")
        if not os.path.isfile(mat_path):
            raise InvalidInputError(f"{dirpath} is missing matrix {i} of {n}")
        m = _read_matrix(mat_path)
        if m.shape != (d, d):
            raise InvalidInputError(f"{mat_path} has shape {m.shape}, manifest says ({d}, {d})")
        mats[i] = m
    return mats, tol


def _sidecar_path(path: str) -> str:
    return os.path.splitext(path)[0] + ".json"


def write_dataset(path: str, dataset: CorruptedDataset) -> None:
    """Dataset CSV plus JSON sidecar; the covariance, when known, lands in a
    third file referenced by the sidecar's sigma_file (a name relative to the
    dataset's directory)."""
    _write_matrix(path, dataset.samples)
    sigma_name: Optional[str] = None
    if dataset.covariance is not None:
        sigma_name = os.path.splitext(os.path.basename(path))[0] + "_sigma.csv"
        _write_matrix(os.path.join(os.path.dirname(path) or ".", sigma_name), dataset.covariance)
    sidecar = {
        "n": dataset.n,
        "d": dataset.d,
        "eps": dataset.eps,
        "seed": dataset.seed,
        "bad_indices": [int(i) for i in dataset.bad_indices],
        "sigma_file": sigma_name,
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(path: str) -> CorruptedDataset:
    samples = _read_matrix(path)
    sidecar_path = _sidecar_path(path)
    if not os.path.isfile(sidecar_path):
        raise InvalidInputError(f"{path} has no sidecar {sidecar_path}")
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    if samples.shape != (int(meta["n"]), int(meta["d"])):
        raise InvalidInputError(
            f"{path} has shape {samples.shape}, sidecar says ({meta['n']}, {meta['d']})"
        )
    covariance = None
    if meta.get("sigma_file"):
        covariance = _read_matrix(os.path.join(os.path.dirname(path) or ".", meta["sigma_file"]))
    return CorruptedDataset(
        samples=samples,
        bad_indices=np.asarray(meta["bad_indices"], dtype=np.intp),
        eps=float(meta["eps"]),
        seed=int(meta["seed"]),
        strategy_kind="file",
        covariance=covariance,
    )


def write_results_csv(path: str, rows) -> None:
    """One row per run, fixed column order RESULT_COLUMNS. Numeric fields are
    rendered with 17 significant digits; missing fields render empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            rendered = []
            for col in RESULT_COLUMNS:
                val = row.get(col, "")
                if val is None or val == "":
                    rendered.append("")
                elif col in ("seed", "n", "d", "iterations"):
                    rendered.append(str(int(val)))
                elif col == "verdict":
                    rendered.append(str(val))
                else:
                    rendered.append(_fmt(val))
            writer.writerow(rendered)


def read_results_csv(path: str):
    """Rows as dicts of raw strings, preserving the serialized form so rerun
    comparison can be exact."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_COLUMNS:
            raise InvalidInputError(f"{path}: header {header} != {list(RESULT_COLUMNS)}")
        return [dict(zip(RESULT_COLUMNS, row)) for row in reader]


def write_summary_json(path: str, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
