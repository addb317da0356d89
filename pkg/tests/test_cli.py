import json
import math
import os

import numpy as np
import pytest

from resfluor.cli import main
from resfluor.correlation import G2Trace
from resfluor.spectra import SpectrumTrace


def _read(path):
    with open(path) as fh:
        return SpectrumTrace.from_csv(fh.read())


def _ini(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestSimulate:
    def test_extinction_noiseless(self, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["simulate", "extinction", "--out", out]) == 0
        tr = _read(os.path.join(out, "extinction.csv"))
        assert tr.values.min() == pytest.approx(1.0 - 0.115, rel=1e-9)
        assert "dip depth" in capsys.readouterr().out
        assert os.path.exists(os.path.join(out, "extinction.json"))

    def test_extinction_noisy_seed_determinism(self, tmp_path):
        cfg = _ini(tmp_path, "[simulate]\nnoise = true\n")
        out1, out2, out3 = (str(tmp_path / d) for d in ("o1", "o2", "o3"))
        for out in (out1, out2):
            assert main(["simulate", "extinction", "--config", cfg,
                         "--seed", "5", "--out", out]) == 0
        assert main(["simulate", "extinction", "--config", cfg,
                     "--seed", "6", "--out", out3]) == 0
        b1 = open(os.path.join(out1, "extinction.csv"), "rb").read()
        b2 = open(os.path.join(out2, "extinction.csv"), "rb").read()
        b3 = open(os.path.join(out3, "extinction.csv"), "rb").read()
        assert b1 == b2
        assert b1 != b3

    def test_mollow_outputs(self, tmp_path):
        cfg = _ini(tmp_path, "[drive]\nrabi = 100.0\n")
        out = str(tmp_path / "out")
        assert main(["simulate", "mollow", "--config", cfg, "--out", out]) == 0
        em = _read(os.path.join(out, "mollow_emission.csv"))
        det = _read(os.path.join(out, "mollow_detected.csv"))
        # emission grid covers one FSR and resolves the instrument
        assert em.grid[-1] - em.grid[0] >= 356.0
        assert np.max(np.diff(em.grid)) <= 14.0 / 4.0
        assert det.value_kind == "counts_per_s"
        # sidebands near +-rabi in the raw emission
        pos = em.grid > 50.0
        assert em.grid[pos][np.argmax(em.values[pos])] == pytest.approx(100.0, rel=0.05)

    def test_g2_trace(self, tmp_path):
        cfg = _ini(tmp_path, "[drive]\nrabi = 60.0\n")
        out = str(tmp_path / "out")
        assert main(["simulate", "g2", "--config", cfg, "--out", out]) == 0
        with open(os.path.join(out, "g2.csv")) as fh:
            tr = G2Trace.from_csv(fh.read())
        assert tr.values[0] == 0.0
        assert tr.values[-1] == pytest.approx(1.0, abs=0.05)

    def test_counts_threads_bit_identical(self, tmp_path):
        out1, out8 = str(tmp_path / "t1"), str(tmp_path / "t8")
        args = ["simulate", "counts", "--seed", "3"]
        assert main(args + ["--threads", "1", "--out", out1]) == 0
        assert main(args + ["--threads", "8", "--out", out8]) == 0
        assert open(os.path.join(out1, "counts.csv"), "rb").read() == \
            open(os.path.join(out8, "counts.csv"), "rb").read()

    def test_bad_threads_rejected(self, tmp_path):
        assert main(["simulate", "counts", "--threads", "0",
                     "--out", str(tmp_path)]) == 2


class TestAnalyze:
    def test_fit_spectrum_round_trip(self, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["simulate", "extinction", "--out", out]) == 0
        assert main(["analyze", "fit-spectrum",
                     os.path.join(out, "extinction.csv"), "--out", out]) == 0
        with open(os.path.join(out, "fit_spectrum.json")) as fh:
            payload = json.load(fh)
        assert payload["status"] == "converged"
        assert payload["params"]["gamma"] == pytest.approx(17.0, rel=1e-3)
        assert "gamma" in capsys.readouterr().out

    def test_g2_fit_recovers_rabi(self, tmp_path):
        cfg = _ini(tmp_path, "[drive]\nrabi = 60.0\n")
        out = str(tmp_path / "out")
        assert main(["simulate", "g2", "--config", cfg, "--out", out]) == 0
        assert main(["analyze", "g2-fit", os.path.join(out, "g2.csv"),
                     "--out", out]) == 0
        with open(os.path.join(out, "g2_fit.json")) as fh:
            payload = json.load(fh)
        assert payload["params"]["rabi"] == pytest.approx(60.0, rel=1e-4)
        assert "saturation" in payload

    def test_saturation_fit_recovers_p_sat(self, tmp_path):
        out = str(tmp_path / "out")
        assert main(["simulate", "saturation-sweep", "--out", out]) == 0
        assert main(["analyze", "saturation-fit",
                     os.path.join(out, "saturation_coherent.csv"),
                     os.path.join(out, "saturation_total.csv"),
                     "--out", out]) == 0
        with open(os.path.join(out, "saturation_fit.json")) as fh:
            payload = json.load(fh)
        assert payload["params"]["p_sat"] == pytest.approx(350.0, rel=1e-6)

    def test_saturation_fit_needs_two_inputs(self, tmp_path):
        assert main(["analyze", "saturation-fit", "only-one.csv",
                     "--out", str(tmp_path)]) == 2

    def test_separate_on_reproduced_series(self, tmp_path):
        out = str(tmp_path / "out")
        assert main(["reproduce", "fig4", "--out", out]) == 0
        fig = os.path.join(out, "fig4")
        assert main(["analyze", "separate", os.path.join(fig, "manifest.json"),
                     "--out", out]) == 0
        with open(os.path.join(out, "separate.json")) as fh:
            payload = json.load(fh)
        assert payload["status"] == "converged"
        assert payload["params"]["psi0"] == pytest.approx(math.pi / 2.0, abs=1e-4)

    def test_unparseable_input_is_exit_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("")
        assert main(["analyze", "fit-spectrum", str(bad),
                     "--out", str(tmp_path)]) == 2
        assert main(["analyze", "g2-fit", str(bad), "--out", str(tmp_path)]) == 2
        assert main(["analyze", "separate", str(bad), "--out", str(tmp_path)]) == 2

    def test_missing_input_is_exit_2(self, tmp_path):
        assert main(["analyze", "fit-spectrum", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path)]) == 2


class TestReproduce:
    @pytest.mark.parametrize("fig", ["fig2", "fig3", "fig4", "fig5", "fig6"])
    def test_manifest_written(self, tmp_path, fig):
        out = str(tmp_path / "out")
        assert main(["reproduce", fig, "--out", out]) == 0
        with open(os.path.join(out, fig, "manifest.json")) as fh:
            manifest = json.load(fh)
        assert manifest["figure"] == fig
        assert manifest["config_hash"]
        assert "paper_anchored" in manifest and "synthetic_defaults" in manifest
        for name in manifest["files"]:
            assert os.path.exists(os.path.join(out, fig, name)), name

    def test_unknown_figure_is_exit_2(self, tmp_path):
        assert main(["reproduce", "fig9", "--out", str(tmp_path)]) == 2

    def test_fig3_curves_cross_and_peak(self, tmp_path):
        out = str(tmp_path / "out")
        assert main(["reproduce", "fig3", "--out", out]) == 0
        coh = _read(os.path.join(out, "fig3", "fig3_coherent.csv"))
        tot = _read(os.path.join(out, "fig3", "fig3_total.csv"))
        # coherent curve peaks at P_sat (S = 1) with value 1/4
        k = int(np.argmax(coh.values))
        assert coh.grid[k] == pytest.approx(350.0, rel=0.1)
        assert coh.values.max() == pytest.approx(0.25, abs=0.001)
        # total signal dominates at high power
        assert tot.values[-1] > 10 * coh.values[-1]

    def test_fig6_snr_annotation(self, tmp_path):
        out = str(tmp_path / "out")
        assert main(["reproduce", "fig6", "--out", out]) == 0
        with open(os.path.join(out, "fig6", "manifest.json")) as fh:
            anchored = json.load(fh)["paper_anchored"]
        assert anchored["dip_cps_computed"] == pytest.approx(49.19, abs=0.05)
        assert abs(anchored["dip_cps_computed"] - anchored["dip_cps_paper"]) \
            / anchored["dip_cps_paper"] < 0.05
        assert 3.0 < anchored["snr_per_pixel"] < 4.5


def test_config_error_paths(tmp_path):
    bad = _ini(tmp_path, "[molecule]\ngamma = soft\n")
    assert main(["simulate", "extinction", "--config", bad,
                 "--out", str(tmp_path)]) == 2
    assert main(["simulate", "extinction", "--config", str(tmp_path / "none.ini"),
                 "--out", str(tmp_path)]) == 2
