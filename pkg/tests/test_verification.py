"""Check plumbing and the lighter verification suites.

The heavy suites (manufactured path, flow, pinching) and the acceptance
tolerances they certify run in test_acceptance; here the focus is the
reporting semantics and that the cheap suites pass standalone.
"""

import pytest

from reebflow.verification import (
    CheckResult,
    DEFAULT_SEED,
    VerifyRun,
    curvature_suite,
    functional_identity_suite,
    mobius_scan_suite,
    oracle_suite,
)


class TestCheckResult:
    def test_value_is_smaller_is_better(self):
        ok = CheckResult("probe", True, 1e-12, 1e-8)
        assert ok.value < ok.tolerance and ok.passed
        bad = CheckResult("probe", False, 2.0, 1e-8, detail="raw margin -2")
        assert not bad.passed and bad.detail

    def test_failures_filter(self):
        run = VerifyRun(
            checks=(
                CheckResult("a", True, 0.0, 1.0),
                CheckResult("b", False, 2.0, 1.0),
            ),
            artifacts=(),
            manifest=None,
            passed=False,
            wall_time=0.0,
        )
        assert [c.name for c in run.failures()] == ["b"]


class TestIdentitySuite:
    def test_small_sample_passes(self):
        checks, ledgers = functional_identity_suite(n=96, samples=6, seed=11)
        assert all(c.passed for c in checks)
        assert len(ledgers) == 6
        names = {c.name for c in checks}
        assert "identity-translation" in names
        assert "identity-cocycle" in names
        assert "identity-j-collapse" in names

    def test_seed_determinism(self):
        a = functional_identity_suite(n=96, samples=4, seed=5)[1]
        b = functional_identity_suite(n=96, samples=4, seed=5)[1]
        c = functional_identity_suite(n=96, samples=4, seed=6)[1]
        assert [l.I for l in a] == [l.I for l in b]
        assert [l.I for l in a] != [l.I for l in c]


class TestMobiusSuite:
    def test_default_grid_passes(self):
        checks, scans, spec = mobius_scan_suite()
        assert all(c.passed for c in checks)
        assert scans[0].name == "mobius"
        assert list(scans[0].params) == [1.0, 2.0, 4.0, 8.0, 16.0]
        assert spec.has_obstruction

    def test_coarse_grid_reports_honestly(self):
        # at n = 96 the lambda = 16 member is underresolved and the
        # closed-form check must fail rather than loosen itself
        checks, _, _ = mobius_scan_suite(n=96)
        by_name = {c.name: c for c in checks}
        assert not by_name["mobius-j-closed-form"].passed
        assert by_name["mobius-j-closed-form"].value > 1e-10


class TestSmallSuites:
    def test_curvature_suite(self):
        checks, report = curvature_suite(seed=DEFAULT_SEED)
        assert all(c.passed for c in checks)
        assert report.m == 2 and abs(report.integrand) < 1e-12

    def test_oracle_suite(self):
        checks = oracle_suite(n=96, n_theta=256)
        assert all(c.passed for c in checks)
        assert {c.name for c in checks} == {
            "oracle-profiles", "oracle-jacobian-fd", "oracle-spectrum",
        }
