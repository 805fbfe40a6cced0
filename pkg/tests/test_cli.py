import json

import numpy as np
import pytest

from ecgpcg.cli import main
from ecgpcg.models import load_model
from ecgpcg.signal_io import (BeatAnnotation, FiducialSet, Record, load_record,
                              write_fiducials, write_record)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "synth.cfg").write_text("duration_s = 30\nfs = 500\nrng_seed = 4\n")
    (d / "pre.cfg").write_text("target_fs = 250\n")
    assert main(["synth", "--config", str(d / "synth.cfg"), "--out", str(d / "raw.csv")]) == 0
    assert main(["preprocess", "--in", str(d / "raw.csv"), "--config", str(d / "pre.cfg"),
                 "--out", str(d / "pre.bin")]) == 0
    return d


def run_ok(*argv):
    assert main([str(a) for a in argv]) == 0


def run_err(capsys, *argv):
    assert main([str(a) for a in argv]) == 1
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_synth_and_preprocess_outputs(workdir):
    raw = load_record(workdir / "raw.csv")
    pre = load_record(workdir / "pre.bin")
    assert raw.fs == 500 and raw.ecg.size == 15_000
    assert pre.fs == 250 and pre.ecg.size == 7_500
    assert "config_hash=" in raw.provenance and "tool=ecgpcg" in pre.provenance


def test_dataset_train_reconstruct_evaluate(workdir, capsys):
    d = workdir
    run_ok("dataset", "--in", d / "pre.bin", "--direction", "p2e", "--scheme", "noncausal",
           "--delta-t", 0.1, "--stride", 0.008, "--out", d / "p2e.ds")
    run_ok("train", "--dataset", d / "p2e.ds", "--model", "lasso", "--lam", 1e-3,
           "--seed", 3, "--out", d / "p2e.model")
    model = load_model(d / "p2e.model")
    assert model.meta["direction"] == "PcgToEcg" and model.meta["fs"] == 250
    assert model.meta["provenance"]["seed"] == 3
    run_ok("reconstruct", "--model", d / "p2e.model", "--in", d / "pre.bin",
           "--direction", "p2e", "--out", d / "hat.csv")
    hat = load_record(d / "hat.csv")
    assert "reconstructed_channel=ecg" in hat.provenance
    run_ok("evaluate", "--ref", d / "pre.bin", "--hat", d / "hat.csv", "--out", d / "m.json")
    report = json.loads((d / "m.json").read_text())
    assert report["channel"] == "ecg" and report["envelope"] is False
    assert {"snr_db", "cc", "weighted_coherence", "coherence_curve", "flags",
            "provenance"} <= set(report)
    assert -1 <= report["cc"] <= 1


def test_evaluate_identical_record(workdir):
    d = workdir
    run_ok("evaluate", "--ref", d / "pre.bin", "--hat", d / "pre.bin", "--channel", "pcg",
           "--out", d / "same.json")
    report = json.loads((d / "same.json").read_text())
    assert report["snr_db"] == 120 and report["cc"] == pytest.approx(1.0)


def test_envelope_and_mlp_path(workdir):
    d = workdir
    (d / "train.cfg").write_text("epochs = 1\nmlp_hidden = 8, 4\n")
    run_ok("dataset", "--in", d / "pre.bin", "--direction", "e2p", "--scheme", "causal",
           "--delta-t", 0.05, "--target", "envelope", "--out", d / "env.ds")
    run_ok("train", "--dataset", d / "env.ds", "--model", "mlp", "--scale", "cross",
           "--config", d / "train.cfg", "--out", d / "env.model")
    m = load_model(d / "env.model")
    assert m.hidden == (16, 8) and m.meta["envelope_inputs"]
    run_ok("reconstruct", "--model", d / "env.model", "--in", d / "pre.bin",
           "--direction", "e2p", "--out", d / "env_hat.csv")
    run_ok("evaluate", "--ref", d / "pre.bin", "--hat", d / "env_hat.csv",
           "--out", d / "env.json")
    report = json.loads((d / "env.json").read_text())
    assert report["channel"] == "pcg" and report["envelope"] is True


def test_reconstruct_direction_mismatch(workdir, capsys):
    d = workdir
    run_ok("dataset", "--in", d / "pre.bin", "--direction", "p2e", "--delta-t", 0.05,
           "--out", d / "small.ds")
    run_ok("train", "--dataset", d / "small.ds", "--model", "lasso", "--out", d / "s.model")
    err = run_err(capsys, "reconstruct", "--model", d / "s.model", "--in", d / "pre.bin",
                  "--direction", "e2p", "--out", d / "x.csv")
    assert err["error"] == "InvalidConfig"
    err = run_err(capsys, "reconstruct", "--model", d / "s.model", "--in", d / "raw.csv",
                  "--direction", "p2e", "--out", d / "x.csv")
    assert err["error"] == "InvalidConfig" and "fs" in err["message"]


def test_psd_csv(workdir):
    d = workdir
    run_ok("psd", "--in", d / "raw.csv", "--channel", "ecg", "--out", d / "psd.csv")
    lines = (d / "psd.csv").read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "freq_hz,psd"
    rows = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]])
    assert rows.shape == (251, 2)
    assert rows[0, 0] == 0 and rows[-1, 0] == 250 and np.all(rows[:, 1] >= 0)


def test_fiducial_eval(workdir):
    d = workdir
    ref = FiducialSet([BeatAnnotation(qrs_on=k + 0.1, r_peak=k + 0.15, qrs_off=k + 0.2,
                                      t_on=k + 0.3, t_peak=k + 0.4, t_off=k + 0.5)
                       for k in range(1, 11)])
    det = FiducialSet([b.shifted(t_off=0.02) for b in ref])
    write_fiducials(d / "ref.csv", ref)
    write_fiducials(d / "det.csv", det)
    run_ok("fiducial-eval", "--ref", d / "ref.csv", "--det", d / "det.csv",
           "--out", d / "table.csv", "--biomarkers", d / "bio.json")
    text = (d / "table.csv").read_text()
    assert "metric,QRSon,Rpeak,QRSoff,Ton,Tpeak,Toff" in text
    assert "MAE,0.0,0.0,0.0,0.0,0.0,20.0" in text
    bio = json.loads((d / "bio.json").read_text())
    assert bio["qt"]["mae_ms"] == pytest.approx(20) and bio["n_matched_beats"] == 10


def test_psd_grid_at_1khz(tmp_path):
    (tmp_path / "s.cfg").write_text("duration_s = 10\nfs = 1000\n")
    run_ok("synth", "--config", tmp_path / "s.cfg", "--out", tmp_path / "r.csv")
    run_ok("psd", "--in", tmp_path / "r.csv", "--channel", "pcg", "--out", tmp_path / "p.csv")
    body = [ln for ln in (tmp_path / "p.csv").read_text().splitlines()
            if not ln.startswith("#")]
    freqs = [float(ln.split(",")[0]) for ln in body[1:]]
    assert freqs == list(range(501))


def test_fiducial_eval_identity(tmp_path):
    ref = FiducialSet([BeatAnnotation(qrs_on=k + 0.1, r_peak=k + 0.15, t_off=k + 0.5)
                       for k in range(1, 6)])
    write_fiducials(tmp_path / "ref.csv", ref)
    run_ok("fiducial-eval", "--ref", tmp_path / "ref.csv", "--det", tmp_path / "ref.csv",
           "--out", tmp_path / "t.csv")
    rows = {ln.split(",")[0]: ln.split(",")[1:]
            for ln in (tmp_path / "t.csv").read_text().splitlines() if not ln.startswith("#")}
    assert rows["MAE"][:2] == ["0.0", "0.0"] and rows["RMSE"][5] == "0.0"
    assert rows["Sen %"][0] == rows["Sen %"][1] == rows["Sen %"][5] == "100.0"
    assert rows["N"] == ["5", "5", "0", "0", "0", "5"]


def test_experiment_subcommand(workdir, capsys):
    d = workdir
    (d / "exp.manifest").write_text(
        "synth = synth.cfg\nsynth = synth.cfg\nscheme.delta_t_s = 0.05\n"
        "preprocess = false\nout = exp_out\n")
    run_ok("experiment", "--manifest", d / "exp.manifest", "--out", d / "exp_cli")
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_folds"] == 2 and summary["failed_folds"] == []
    assert (d / "exp_cli" / "aggregate.json").exists()


def test_errors_are_json(workdir, capsys, tmp_path):
    err = run_err(capsys, "evaluate", "--ref", tmp_path / "missing.csv", "--hat",
                  workdir / "raw.csv")
    assert set(err) >= {"error", "message"}
    (tmp_path / "bad.cfg").write_text("duration_s = -3\n")
    err = run_err(capsys, "synth", "--config", tmp_path / "bad.cfg", "--out", tmp_path / "x.csv")
    assert err["error"] == "InvalidConfig"
    noise = np.random.default_rng(0).standard_normal(5000)
    write_record(tmp_path / "flat.csv", Record("flat", "Synthetic", 1000, np.zeros(5000), noise))
    err = run_err(capsys, "preprocess", "--in", tmp_path / "flat.csv", "--out",
                  tmp_path / "y.csv")
    assert err["error"] == "StageError" and err["stage"] and err["channel"] == "ecg"


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2
