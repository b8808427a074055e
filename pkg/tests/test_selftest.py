"""Tests for the acceptance suite runner."""

import pytest

from mpsprep.linalg import ConfigError
from mpsprep.selftest import CHECKS, SUITE_PATH, load_suite, run_selftest


class TestLoadSuite:
    def test_bundled_suite(self):
        specs = load_suite()
        assert [s.id for s in specs] == list(range(1, 13))
        assert all(s.check in CHECKS for s in specs)

    def test_quick_overrides(self):
        full = {s.id: s.params for s in load_suite()}
        quick = {s.id: s.params for s in load_suite(quick=True)}
        assert quick[1]["points"] < full[1]["points"]
        assert quick[1]["sites"] == full[1]["sites"]
        assert quick[2] == full[2]

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_suite(tmp_path / "none.yaml")

    def test_not_a_list(self, tmp_path):
        path = tmp_path / "suite.yaml"
        path.write_text("check: runtime\n")
        with pytest.raises(ConfigError, match="list"):
            load_suite(path)

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "suite.yaml"
        path.write_text("- check: runtime\n")
        with pytest.raises(ConfigError, match="need"):
            load_suite(path)

    def test_unknown_check(self, tmp_path):
        path = tmp_path / "suite.yaml"
        path.write_text("- {id: 1, name: x, check: nonsense}\n")
        with pytest.raises(ConfigError, match="unknown check"):
            load_suite(path)


class TestRunSelftest:
    def test_only(self):
        results = run_selftest(quick=True, only=[2, 12])
        assert results.total == 2
        assert results.all_passed

    def test_failure_is_recorded(self, tmp_path):
        path = tmp_path / "suite.yaml"
        path.write_text("- {id: 1, name: broken, check: aklt_analytics, params: {}}\n")
        results = run_selftest(path)
        assert results.failed == 1
        assert results.failures[0].error.startswith("KeyError")

    def test_verbose(self, capsys):
        run_selftest(SUITE_PATH, only=[12], verbose=True)
        assert "PASS  [12] suite runtime" in capsys.readouterr().out

    @pytest.mark.slow
    def test_quick_suite_passes(self):
        results = run_selftest(quick=True)
        assert results.all_passed, [r.error or r.detail for r in results.failures]
