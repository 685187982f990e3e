"""Acceptance gate: one test per shipped guarantee.

Each test pins the tolerances the package promises and, where a wall
budget is part of the promise, the runtime.  Expensive computations are
shared through module-scope fixtures so every guarantee is still
asserted against the same run a user of verify-all would get.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from reebflow import cli
from reebflow.verification import (
    DEFAULT_SEED,
    IDENTITY_GRID_N,
    PDE_GRID_N,
    curvature_suite,
    flow_suite,
    functional_identity_suite,
    manufactured_path_suite,
    mobius_scan_suite,
    oracle_suite,
    pinching_suite,
)


def _by_name(checks):
    return {c.name: c for c in checks}


@pytest.fixture(scope="module")
def identity_run():
    t0 = time.perf_counter()
    checks, ledgers = functional_identity_suite(
        n=IDENTITY_GRID_N, samples=100, seed=DEFAULT_SEED
    )
    return _by_name(checks), ledgers, time.perf_counter() - t0


@pytest.fixture(scope="module")
def path_run():
    t0 = time.perf_counter()
    checks, bundle = manufactured_path_suite(n=PDE_GRID_N)
    return _by_name(checks), bundle, time.perf_counter() - t0


@pytest.fixture(scope="module")
def flow_run(path_run):
    _, bundle, _ = path_run
    t0 = time.perf_counter()
    checks, traj = flow_suite(
        n=PDE_GRID_N, path_endpoint=bundle.adaptive.endpoint().phi
    )
    return _by_name(checks), traj, time.perf_counter() - t0


@pytest.fixture(scope="module")
def mobius_run():
    t0 = time.perf_counter()
    checks, scans, spec = mobius_scan_suite(n=IDENTITY_GRID_N)
    return _by_name(checks), scans[0], spec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def pinch_run():
    t0 = time.perf_counter()
    checks, result = pinching_suite(n=PDE_GRID_N, eps=0.05)
    return _by_name(checks), result, time.perf_counter() - t0


def test_c01_functional_identities_on_random_potentials(identity_run):
    checks, ledgers, elapsed = identity_run
    assert len(ledgers) == 100
    assert checks["identity-translation"].passed
    assert checks["identity-translation"].value < 1e-10
    assert checks["identity-cocycle"].passed
    assert checks["identity-cocycle"].value < 1e-8
    assert checks["identity-antisymmetry"].passed
    assert checks["identity-antisymmetry"].value < 1e-8
    assert checks["identity-sandwich"].passed
    assert checks["identity-j-collapse"].passed
    assert checks["identity-j-collapse"].value < 1e-10
    assert checks["identity-mabuchi"].passed
    assert checks["identity-mabuchi"].value < 1e-8
    assert elapsed < 30.0


def test_c02_manufactured_solution_recovery_along_path(path_run):
    checks, bundle, elapsed = path_run
    assert bundle.adaptive.completed and bundle.gauss.completed
    assert checks["path-recovery-adaptive"].passed
    assert checks["path-recovery-adaptive"].value < 1e-7
    assert checks["path-recovery-gauss"].passed
    assert checks["path-recovery-gauss"].value < 1e-7
    assert checks["path-monotone"].passed  # min margin above -1e-8
    assert checks["path-curvature-identity"].passed
    assert checks["path-curvature-identity"].value < 1e-7
    assert elapsed < 120.0


def test_c03_energy_equals_integrated_excess(path_run):
    checks, bundle, _ = path_run
    assert len(bundle.gauss.records) == 49  # 48 quadrature records + endpoint
    assert checks["path-energy-identity"].passed
    assert checks["path-energy-identity"].value < 1e-5


def test_c04_mobius_family_flatness_and_obstruction(mobius_run):
    checks, scan, spec, elapsed = mobius_run
    assert list(scan.params) == [1.0, 2.0, 4.0, 8.0, 16.0]
    assert checks["mobius-f-flat"].passed
    assert checks["mobius-f-flat"].value < 1e-6
    assert checks["mobius-j-increasing"].passed
    assert np.all(np.diff(scan.j_values) > 0)
    assert checks["mobius-j-growth"].passed
    assert scan.j_values[-1] > 10.0 * scan.j_values[1]
    assert checks["mobius-j-closed-form"].passed
    assert spec.has_obstruction
    assert checks["round-obstruction-eigenvalue"].passed
    assert checks["round-obstruction-eigenvalue"].value < 1e-6
    assert elapsed < 60.0


def test_c05_flow_monitor_bounds_and_stationarity(flow_run):
    checks, traj, elapsed = flow_run
    assert traj.completed and traj.endpoint().s == pytest.approx(2.0, abs=1e-9)
    for name in ("flow-monitor-a", "flow-monitor-b",
                 "flow-monitor-c", "flow-monitor-d"):
        assert checks[name].passed, name
        assert checks[name].tolerance == 1e-6
    assert checks["flow-constancy"].passed
    assert checks["flow-stationary-round"].passed
    assert checks["flow-stationary-round"].value < 1e-10
    assert elapsed < 120.0


def test_c06_flow_limit_matches_path_endpoint(flow_run):
    checks, _, _ = flow_run
    assert checks["flow-path-consistency"].passed
    assert checks["flow-path-consistency"].value < 1e-5


def test_c07_curvature_contraction_identities():
    t0 = time.perf_counter()
    checks, report = curvature_suite(seed=DEFAULT_SEED)
    elapsed = time.perf_counter() - t0
    by = _by_name(checks)
    assert by["curvature-q-identity"].passed
    assert by["curvature-q-identity"].value < 1e-12
    assert by["curvature-integrand"].passed
    assert by["curvature-integrand"].value < 1e-12
    assert by["curvature-rm2-pinned"].passed
    assert by["curvature-rm2-pinned"].value < 1e-12
    assert report.model.riemann_norm_sq == 48.0
    assert elapsed < 5.0


def test_c08_epsilon_pinching_production(pinch_run):
    checks, result, elapsed = pinch_run
    assert result.achieved < 0.05
    assert checks["pinch-achieved"].passed
    assert checks["pinch-calabi"].passed
    assert result.calabi < result.calabi_bound_value
    assert checks["pinch-flow-h-slack"].passed
    assert checks["pinch-flow-dh2-slack"].passed
    assert checks["pinch-flow-lap-min"].passed
    assert elapsed < 180.0


def test_c09_independent_oracles_agree():
    checks = _by_name(oracle_suite(n=PDE_GRID_N, n_theta=512))
    assert checks["oracle-profiles"].passed
    assert checks["oracle-profiles"].value < 1e-6
    assert checks["oracle-jacobian-fd"].passed
    assert checks["oracle-jacobian-fd"].value < 1e-6
    assert checks["oracle-spectrum"].passed
    assert checks["oracle-spectrum"].value < 1e-8


def test_c10_verification_runs_are_reproducible(tmp_path_factory, capsys):
    outs = []
    for tag in ("one", "two"):
        out = Path(tmp_path_factory.mktemp(f"verify_{tag}"))
        rc = cli.main(
            ["verify-all", "--quick", "--seed", str(DEFAULT_SEED),
             "--out", str(out)]
        )
        assert rc == 0
        outs.append(out)
    capsys.readouterr()

    names = [sorted(p.name for p in out.iterdir()) for out in outs]
    assert names[0] == names[1]
    compared = 0
    for name in names[0]:
        if name == "manifest.json":
            continue  # records wall time, deliberately unique
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
        compared += 1
    assert compared >= 10
    # the manifests must still agree on every artifact hash
    hashes = [
        {a["name"]: a["sha256"]
         for a in json.loads((out / "manifest.json").read_text())["artifacts"]}
        for out in outs
    ]
    assert hashes[0] == hashes[1]
