"""File formats: Laplacian graphs, data matrices, masks, labels, reports.

Graphs travel either as a weighted edge list (TSV with a ``# laplacian``
header; the diagonal is implied by zero row sums unless explicit ``i i d``
rows appear) or as a dense CSV without header; readers auto-detect.  Data
matrices are CSV with one row per product-graph node in q*P + p order and
one column per snapshot.  All writers format floats with repr and reports
round to 12 significant digits, so identical values give identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .clustering import ClusterLabels
from .laplacian import (
    DEFAULT_TOL,
    GraphLaplacian,
    MultiDomainData,
    ValidationTol,
    from_dense,
)

LAPLACIAN_HEADER = "# laplacian"
DATA_HEADER = "# data"
MASK_HEADER = "# mask"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_laplacian(path: str | Path, L: GraphLaplacian, fmt: str = "edges",
                    include_diagonal: bool = False) -> None:
    """Write a graph file; ``fmt`` is ``edges`` (TSV) or ``dense`` (CSV).

    The edge format omits the diagonal by default so that re-reading
    reconstructs it from zero row sums, which keeps graphs learned only to
    solver tolerance readable under strict validation.
    """
    path = Path(path)
    if fmt == "edges":
        lines = [f"{LAPLACIAN_HEADER} n={L.n}"]
        w = L.adjacency()
        for i in range(L.n):
            for j in range(i + 1, L.n):
                if w[i, j] > 0:
                    lines.append(f"{i}\t{j}\t{_fmt(w[i, j])}")
        if include_diagonal:
            for i in range(L.n):
                lines.append(f"{i}\t{i}\t{_fmt(L.dense[i, i])}")
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "dense":
        lines = [",".join(_fmt(v) for v in row) for row in L.dense]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown graph format {fmt!r}")


def read_laplacian(path: str | Path, validate: bool = True,
                   tol: ValidationTol = DEFAULT_TOL) -> GraphLaplacian:
    """Read a graph file, auto-detecting edge-list vs dense CSV."""
    path = Path(path)
    text = path.read_text()
    first = text.splitlines()[0] if text.strip() else ""
    if first.startswith(LAPLACIAN_HEADER):
        return _read_edge_list(text, path, validate, tol)
    dense = np.loadtxt(path, delimiter=",", ndmin=2)
    return from_dense(dense, validate=validate, tol=tol)


def _read_edge_list(text: str, path: Path, validate: bool,
                    tol: ValidationTol) -> GraphLaplacian:
    lines = text.splitlines()
    header = lines[0].removeprefix(LAPLACIAN_HEADER).strip()
    fields = dict(part.split("=") for part in header.split())
    try:
        n = int(fields["n"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed laplacian header {lines[0]!r}") from exc
    w = np.zeros((n, n))
    explicit_diag: dict[int, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'i<TAB>j<TAB>w', got {line!r}")
        i, j, val = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"{path}:{lineno}: node index out of range for n={n}")
        if i == j:
            explicit_diag[i] = val
            continue
        if i > j:
            raise ValueError(f"{path}:{lineno}: edges must satisfy i < j")
        if val <= 0:
            raise ValueError(f"{path}:{lineno}: edge weight must be positive")
        w[i, j] = w[j, i] = val
    dense = np.diag(w.sum(axis=1)) - w
    for i, val in explicit_diag.items():
        dense[i, i] = val
    return from_dense(dense, validate=validate, tol=tol)


def write_data_csv(path: str | Path, data: MultiDomainData) -> None:
    """Write N x T signal values with a shape header."""
    lines = [f"{DATA_HEADER} P={data.P} Q={data.Q} T={data.T}"]
    lines += [",".join(_fmt(v) for v in row) for row in data.vecs()]
    Path(path).write_text("\n".join(lines) + "\n")


def _read_shaped_csv(path: Path, header: str) -> tuple[np.ndarray, int, int, int]:
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith(header):
        raise ValueError(f"{path}: missing {header!r} header")
    fields = dict(part.split("=") for part in lines[0].removeprefix(header).strip().split())
    try:
        P, Q, T = int(fields["P"]), int(fields["Q"]), int(fields["T"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header {lines[0]!r}") from exc
    values = np.array(
        [[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()]
    )
    if values.shape != (P * Q, T):
        raise ValueError(
            f"{path}: expected {P * Q} x {T} values, got {values.shape[0]} x {values.shape[1]}"
        )
    return values, P, Q, T


def read_data_csv(path: str | Path) -> MultiDomainData:
    values, P, Q, _ = _read_shaped_csv(Path(path), DATA_HEADER)
    return MultiDomainData.from_matrix(values, P, Q)


def write_mask_csv(path: str | Path, mask: np.ndarray) -> None:
    """Write a boolean (T, P, Q) mask as 0/1 in the data CSV layout."""
    mask = np.asarray(mask, dtype=bool)
    T, P, Q = mask.shape
    data = MultiDomainData(snapshots=mask.astype(float))
    lines = [f"{MASK_HEADER} P={P} Q={Q} T={T}"]
    lines += [",".join(str(int(v)) for v in row) for row in data.vecs()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mask_csv(path: str | Path) -> np.ndarray:
    values, P, Q, _ = _read_shaped_csv(Path(path), MASK_HEADER)
    return MultiDomainData.from_matrix(values, P, Q).snapshots.astype(bool)


def write_labels_csv(path: str | Path, labels: ClusterLabels) -> None:
    lines = ["node_index,label"]
    lines += [f"{i},{int(lab)}" for i, lab in enumerate(labels.labels)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_labels_csv(path: str | Path) -> ClusterLabels:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "node_index,label":
        raise ValueError(f"{path}: missing 'node_index,label' header")
    pairs = [line.split(",") for line in lines[1:] if line.strip()]
    idx = np.array([int(p[0]) for p in pairs])
    labels = np.array([int(p[1]) for p in pairs])
    order = np.argsort(idx)
    labels = labels[order]
    k = int(labels.max()) + 1 if labels.size else 0
    present = np.unique(labels)
    return ClusterLabels(labels=labels, k=k, degenerate=present.size != k)


def write_matrix_csv(path: str | Path, mat: np.ndarray) -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    lines = [",".join(_fmt(v) for v in row) for row in mat]
    Path(path).write_text("\n".join(lines) + "\n")


def round_floats(obj, sig: int = 12):
    """Recursively round floats to ``sig`` significant digits for reports."""
    if isinstance(obj, float):
        return float(f"{obj:.{sig}g}")
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.{sig}g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist(), sig)
    if isinstance(obj, dict):
        return {k: round_floats(v, sig) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, sig) for v in obj]
    return obj


def write_report(path: str | Path, report: dict) -> None:
    """Write a JSON report with sorted keys and 12-digit floats."""
    Path(path).write_text(json.dumps(round_floats(report), sort_keys=True, indent=2) + "\n")
