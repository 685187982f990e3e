"""Artifact serialization: CSV/JSON emission and run manifests.

All CSV floats are written with "%.17g" (full float64 round trip), rows
in deterministic order, so identical inputs produce byte-identical
files.  The manifest is the one deliberately non-reproducible artifact
(it records wall time); determinism comparisons exclude it and use the
content hashes it lists.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .continuity import HOLDER_ALPHA, ContinuityPath
from .curvature import CharacteristicIntegrandReport
from .flow import FlowTrajectory
from .functionals import FunctionalLedger
from .transverse import M_DIM, MetricState

__all__ = [
    "format_float",
    "write_field_csv",
    "write_state_json",
    "write_ledger_csv",
    "write_path_csv",
    "write_flow_csv",
    "write_scan_csv",
    "write_spectrum_csv",
    "write_pinch_json",
    "write_curvature_json",
    "write_checks_csv",
    "content_hash",
    "write_manifest",
]

SCHEMA_VERSION = 1


def format_float(v: float) -> str:
    return "%.17g" % float(v)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    return path


def write_field_csv(path: Path, x: np.ndarray, values: np.ndarray) -> Path:
    return _write_rows(path, ["x", "value"], zip(map(float, x), map(float, values)))


def write_state_json(path: Path, state: MetricState) -> Path:
    payload = {
        "m": M_DIM,
        "n": state.potential.grid.n,
        "ratio": [float(v) for v in state.ratio],
        "scalar_curvature": [float(v) for v in state.scalar_curvature],
        "ricci_potential": [float(v) for v in state.ricci_potential],
        "norm_constant": float(state.norm_constant),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_ledger_csv(path: Path, ledgers: Iterable[FunctionalLedger]) -> Path:
    return _write_rows(
        path,
        ["tag", "I", "J", "F0", "F", "K", "osc", "margin"],
        ((l.tag, l.I, l.J, l.F0, l.F, l.K, l.osc, l.margin) for l in ledgers),
    )


def write_path_csv(path: Path, cpath: ContinuityPath) -> Path:
    def rows():
        for rec in cpath.records:
            led = rec.ledger
            f_t = (1.0 - rec.t) ** (1.0 - HOLDER_ALPHA) * (
                1.0 + 2.0 * (1.0 - rec.t) * rec.c0_norm
            ) ** HOLDER_ALPHA
            yield (
                rec.t, rec.residual, rec.c0_norm,
                led.I, led.J, led.F0, led.F, led.K,
                led.I - led.J, f_t,
            )

    return _write_rows(
        path,
        ["t", "residual", "c0_norm", "I", "J", "F0", "F", "K", "IminusJ", "f_t"],
        rows(),
    )


def write_flow_csv(path: Path, traj: FlowTrajectory) -> Path:
    def rows():
        for rec in traj.records:
            m = rec.monitors
            yield (
                rec.s, m.sup_vdot, m.sup_h, m.sup_dh2, m.c_s,
                m.bound_a_slack, m.bound_b_slack, m.bound_c_min, m.s_pinch,
            )

    return _write_rows(
        path,
        ["s", "sup_vdot", "sup_h", "sup_dh2", "c_s",
         "bound_a_slack", "bound_b_slack", "bound_c_min", "S_pinch"],
        rows(),
    )


def write_scan_csv(path: Path, scans: Iterable) -> Path:
    def rows():
        for scan in scans:
            for p, j, f in zip(scan.params, scan.j_values, scan.f_values):
                yield (scan.name, p, j, f)

    return _write_rows(path, ["family", "param", "J", "F"], rows())


def write_spectrum_csv(path: Path, result) -> Path:
    return _write_rows(
        path,
        ["index", "eigenvalue"],
        ((i, float(ev)) for i, ev in enumerate(result.eigenvalues)),
    )


def write_pinch_json(path: Path, result) -> Path:
    sm = result.smoothing
    payload = {
        "eps": result.eps,
        "achieved": result.achieved,
        "path_t": result.path_t,
        "h_at_path": result.h_at_path,
        "calabi": result.calabi,
        "calabi_bound": result.calabi_bound_value,
        "flow_h_slack": result.flow_h_slack,
        "flow_dh2_slack": result.flow_dh2_slack,
        "flow_lap_h_min": result.flow_lap_h_min,
        "smoothing": {
            "worst_a_slack": sm.worst_a_slack,
            "worst_b_slack": sm.worst_b_slack,
            "worst_c_min": sm.worst_c_min,
            "worst_d_slack": sm.worst_d_slack,
            "max_constancy_dev": sm.max_constancy_dev,
            "u_bound_slack": sm.u_bound_slack,
            "sandwich_lo_margin": sm.sandwich_lo_margin,
            "sandwich_hi_margin": sm.sandwich_hi_margin,
            "sandwich_held": sm.sandwich_held,
            "c1_fit": sm.c1_fit,
            "c7_fit": sm.c7_fit,
        },
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_curvature_json(path: Path, report: CharacteristicIntegrandReport) -> Path:
    payload = {
        "m": report.m,
        "c": report.c,
        "S": report.model.scalar,
        "Rm2": report.model.riemann_norm_sq,
        "rho2": report.model.ricci_norm_sq,
        "Q2": report.model.q_norm_sq,
        "characteristic_integrand": report.integrand,
        "convention": report.model.convention,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_checks_csv(path: Path, checks: Iterable) -> Path:
    return _write_rows(
        path,
        ["name", "passed", "value", "tolerance"],
        ((c.name, int(c.passed), c.value, c.tolerance) for c in checks),
    )


def content_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    path: Path,
    config: Mapping,
    artifacts: Sequence[Path],
    wall_time: float,
    extra: Optional[Mapping] = None,
) -> Path:
    from . import __version__

    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": dict(config),
        "versions": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_seconds": wall_time if math.isfinite(wall_time) else None,
        "artifacts": [
            {"name": Path(a).name, "sha256": content_hash(a)} for a in artifacts
        ],
    }
    if extra:
        payload["extra"] = dict(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
