import json
import math

import pandas as pd
import pytest
from django.conf import settings

from hybrid_borrowing.exceptions import ConfigError
from hybrid_borrowing.io import (
    RunManifest,
    dumps_json,
    file_sha256,
    load_config,
    load_historical_csv,
    write_csv,
)
from hybrid_borrowing.schemas import CaseStudyConfig, DesignEvalConfig, SimulationConfig
from hybrid_borrowing.selection import RuleKind


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfig:
    def test_bundled_configs_validate(self):
        for name, model in (
            ("table5.json", SimulationConfig),
            ("smoke.json", SimulationConfig),
            ("scenario_grid.json", SimulationConfig),
            ("case_study.json", CaseStudyConfig),
            ("design_eval.json", DesignEvalConfig),
        ):
            assert load_config(settings.HYBRID_CONFIG_DIR / name, model)

    def test_syntax_error_names_line(self, tmp_path):
        path = write(tmp_path / "broken.json", '{\n  "seed": 1,\n  "replicates": \n}')
        with pytest.raises(ConfigError, match="line 4"):
            load_config(path, SimulationConfig)

    def test_unknown_key_names_field_path(self, tmp_path):
        config = {
            "seed": 1, "replicates": 10, "rules": ["full"], "methods": [{"name": "ttp"}],
            "scenarios": [{"scenario_id": "a", "tau": 0.1, "k": 4, "n_hc": 30, "n_total": 60, "taus": 0.2}],
        }
        path = write(tmp_path / "extra.json", json.dumps(config))
        with pytest.raises(ConfigError, match=r"scenarios\.0\.taus"):
            load_config(path, SimulationConfig)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="Cannot read config"):
            load_config(tmp_path / "absent.json", SimulationConfig)


class TestSchemas:
    def test_needs_scenarios_or_grid(self):
        with pytest.raises(ValueError, match="either 'scenarios' or 'grid'"):
            SimulationConfig(seed=1, replicates=5, rules=["full"], methods=[{"name": "ttp"}])

    def test_overrides_reach_every_scenario(self):
        config = load_config(settings.HYBRID_CONFIG_DIR / "table5.json", SimulationConfig)
        scenarios = config.to_scenarios(seed=3, replicates=7)
        assert {(s.seed, s.replicates) for s in scenarios} == {(3, 7)}

    def test_rules_and_methods(self):
        config = load_config(settings.HYBRID_CONFIG_DIR / "smoke.json", SimulationConfig)
        kinds = [rule.kind for rule in config.selection_rules()]
        assert kinds[:2] == [RuleKind.SEPARATE, RuleKind.FULL]
        robust, ttp = config.analysis_methods()
        assert robust.fit_settings.n_draws < 20_000
        assert ttp.alpha_pre == 0.10

    def test_case_study_methods_are_checked(self):
        with pytest.raises(ValueError, match="'ttp' must configure"):
            CaseStudyConfig(
                prospective={"y_t": 1, "n_t": 2, "y_c": 0, "n_c": 2}, rules=["full"], ttp={"name": "bayes_separate"}
            )

    def test_design_sizes(self):
        config = load_config(settings.HYBRID_CONFIG_DIR / "design_eval.json", DesignEvalConfig)
        assert [(d.n_t, d.n_c) for d in config.designs()] == [(24, 6), (48, 12), (240, 60), (2400, 600)]
        assert config.alternative_rd() == 0.35


class TestHistoricalCsv:
    def test_bundled_dataset(self):
        path = settings.HYBRID_DATA_DIR / "ankylosing_spondylitis.csv"
        pool = load_historical_csv(path)
        assert pool.indices == tuple(range(1, 9))
        assert file_sha256(path) == load_config(settings.HYBRID_CONFIG_DIR / "case_study.json", CaseStudyConfig).sha256

    def test_rows_are_sorted_by_study(self, tmp_path):
        path = write(tmp_path / "h.csv", "study,responders,size\n2,4,20\n1,3,10\n")
        assert load_historical_csv(path).indices == (1, 2)

    def test_missing_columns(self, tmp_path):
        path = write(tmp_path / "h.csv", "study,responders\n1,3\n")
        with pytest.raises(ConfigError, match="missing columns size"):
            load_historical_csv(path)

    def test_duplicate_study(self, tmp_path):
        path = write(tmp_path / "h.csv", "study,responders,size\n1,3,10\n1,4,10\n")
        with pytest.raises(ConfigError, match="strictly increasing"):
            load_historical_csv(path)

    def test_responders_above_size(self, tmp_path):
        path = write(tmp_path / "h.csv", "study,responders,size\n1,11,10\n")
        with pytest.raises(ConfigError, match="responders must lie"):
            load_historical_csv(path)

    def test_empty_dataset(self, tmp_path):
        path = write(tmp_path / "h.csv", "study,responders,size\n")
        assert load_historical_csv(path).k == 0


class TestWriters:
    def test_json_has_no_nan(self):
        payload = json.loads(dumps_json({"b": math.nan, "a": [1.5, math.nan]}))
        assert payload == {"a": [1.5, None], "b": None}

    def test_csv_uses_unix_newlines(self, tmp_path):
        path = write_csv(pd.DataFrame({"x": [1, 2]}), tmp_path / "out.csv")
        assert path.read_bytes() == b"x\n1\n2\n"

    def test_manifest_records_checksums(self, tmp_path):
        output = write_csv(pd.DataFrame({"x": [1]}), tmp_path / "out.csv")
        manifest = RunManifest(command="simulate", config={"seed": 1}, seed=1)
        manifest.record_input("config", output)
        manifest.record_output(output)
        written = json.loads(manifest.write(tmp_path / "manifest.json").read_text())
        assert written["outputs"]["out.csv"] == file_sha256(output)
        assert written["inputs"]["config"]["sha256"] == file_sha256(output)
        assert written["version"]
