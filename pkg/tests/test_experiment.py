import json

import numpy as np
import pytest

from gtf0.enhancer import EnhanceConfig
from gtf0.experiment import (DEFAULT_SNRS, ExperimentManifest, ResultsTable, run_cell,
                             run_experiment)
from gtf0.hht import EemdConfig

FAST = EnhanceConfig(eemd=EemdConfig(ensemble_size=4))
SIGNALS = [{"synthetic": {"seed": 1, "duration": 1.0}}, {"synthetic": {"seed": 2, "duration": 1.0}}]


@pytest.fixture(scope="module")
def table():
    return run_experiment(ExperimentManifest(signals=SIGNALS, config=FAST, seed=5), write=False)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

class TestManifest:
    def test_defaults(self):
        m = ExperimentManifest(signals=["a.wav"])
        assert m.snrs == list(DEFAULT_SNRS) == [-5.0, -3.0, 0.0, 3.0, 5.0]
        assert m.noises == ["speech_shaped"] and m.seed == 0

    @pytest.mark.parametrize("kw", [{"signals": []}, {"signals": ["a"], "noises": []},
                                    {"signals": ["a"], "snrs": []}])
    def test_empty_grid(self, kw):
        with pytest.raises(ValueError):
            ExperimentManifest(**kw)

    def test_from_json(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"signals": SIGNALS, "snrs": [0], "config": {"gains_db": [3, 3, 3, 3]},
                                 "seed": 2}))
        m = ExperimentManifest.load(p)
        assert m.config.gain_profile.gains_db == (3.0, 3.0, 3.0, 3.0)
        with pytest.raises(ValueError, match="unknown manifest keys"):
            ExperimentManifest.from_dict({"signals": SIGNALS, "snr": [0]})


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

class TestRun:
    def test_row_counts(self, table):
        conds = [r["condition"] for r in table.rows]
        assert conds.count("UNP") == 10 and conds.count("GTF_F0") == 10
        assert table.failed == 0

    def test_manifest_order(self, table):
        keys = [(r["signal"], r["snr_db"]) for r in table.rows[::2]]
        assert keys == [(f"synthetic:{s}", snr) for s in (1, 2) for snr in DEFAULT_SNRS]

    def test_deltas(self, table):
        for unp, gtf in zip(table.rows[::2], table.rows[1::2]):
            for m in ("estoi", "llr", "wss", "seg_snr_db"):
                assert gtf[f"delta_{m}"] == gtf[m] - unp[m]

    def test_summary(self, table):
        s = table.summary()
        assert len(s) == 10 and all(r["n"] == 2 for r in s)
        gtf = [r for r in s if r["condition"] == "GTF_F0"]
        assert np.mean([r["delta_estoi"] for r in gtf]) == pytest.approx(table.mean_delta("estoi"))

    def test_unp_independent_of_config(self, table):
        other = EnhanceConfig(gain_profile=(1.0, 1.0, 1.0, 1.0), eemd=EemdConfig(ensemble_size=2))
        t2 = run_experiment(ExperimentManifest(signals=SIGNALS, config=other, seed=5), write=False)
        unp1 = [r for r in table.rows if r["condition"] == "UNP"]
        unp2 = [r for r in t2.rows if r["condition"] == "UNP"]
        assert unp1 == unp2

    def test_csv_deterministic(self, table):
        t2 = run_experiment(ExperimentManifest(signals=SIGNALS, config=FAST, seed=5), write=False)
        assert t2.to_csv() == table.to_csv()
        assert table.to_csv().splitlines()[0].startswith("signal,noise,snr_db,condition,estoi")

    def test_failures_recorded(self):
        rows = run_cell(("missing.wav", "white", 0.0, FAST.to_dict(), 0, 0, 0, 0, 16000))
        assert len(rows) == 2 and all("error" in r for r in rows)
        t = ResultsTable(rows)
        assert t.failed == 2 and np.isnan(t.mean_delta())

    def test_writes_outputs(self, tmp_path):
        m = ExperimentManifest(signals=SIGNALS[:1], snrs=[0.0], config=FAST, output_dir=str(tmp_path))
        run_experiment(m)
        assert (tmp_path / "results.csv").read_text().count("\n") == 3
        assert (tmp_path / "summary.csv").exists()
        assert len(json.loads((tmp_path / "results.json").read_text())["rows"]) == 2
