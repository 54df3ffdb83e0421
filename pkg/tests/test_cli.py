import csv
import json
import subprocess
import sys

import pytest
import yaml

from dftsofdm import __version__
from dftsofdm.cli import LINK_COLUMNS, WAVEFORM_COLUMNS, main

SMALL = {
    "papr_ccdf": dict(n_trials=1000, curves=[{"scheme": "QPSK"}, {"scheme": "RO_QPSK",
                                                                  "beta_db": -5}]),
    "oob_psd": dict(n_trials=1, curves=[{"scheme": "RO_QPSK"}],
                    freq_grid={"start_sc": -20, "stop_sc": 40, "n_points": 61}),
    "uncoded_ber": dict(n_trials=64, curves=[{"scheme": "PI2_BPSK"}], equalizers=["MMSE", "ZF"],
                        channel={"profile": "NTN-TDL-C"}, snr_grid_db=[0, 5]),
    "capacity": dict(n_trials=20, curves=[{"scheme": "QPSK"}, {"scheme": "RO_QPSK"}],
                     channel={"profile": "NTN-TDL-A", "doppler_hz": 11}, snr_grid_db=[-5, 5]),
    "sinr_table": dict(n_trials=1, curves=[{"scheme": "QPSK"}, {"scheme": "BPSK"}],
                       channel={"profile": "AWGN"}, equalizers=["ZF"], snr_grid_db=[0, 10]),
}


def write_scenario(tmp_path, experiment, **extra):
    body = dict(name=f"t_{experiment}", experiment=experiment, seed=3,
                ofdm={"n_sc": 12, "n_fft": 128, "n_cp": 16})
    body.update(SMALL[experiment])
    body.update(extra)
    path = tmp_path / f"{experiment}.yaml"
    path.write_text(yaml.safe_dump(body))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_list(capsys):
    assert main(["list"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert len(names) >= 5 and "fig4_papr" in names


def test_validate_bundled(capsys):
    assert main(["validate", "fig4_papr"]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_odd_roqpsk(tmp_path, capsys):
    path = write_scenario(tmp_path, "papr_ccdf", ofdm={"n_sc": 11, "n_fft": 128})
    assert main(["validate", str(path)]) == 2
    diags = [json.loads(line) for line in capsys.readouterr().err.splitlines()]
    assert any(d["field"] == "curves[1].scheme" and "even" in d["error"] for d in diags)


def test_unknown_scenario(capsys):
    assert main(["run", "fig99", "--seed", "1"]) == 2
    assert "unknown scenario" in capsys.readouterr().err


@pytest.mark.parametrize("experiment", list(SMALL))
def test_run_each_experiment(experiment, tmp_path, capsys):
    path = write_scenario(tmp_path, experiment)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out-dir", str(out)]) == 0
    target = out / f"t_{experiment}"
    manifest = json.loads((target / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["library_version"] == __version__
    assert manifest["csv_schema_version"] == 1
    assert manifest["scenario"]["experiment"] == experiment
    assert manifest["wall_time_s"] >= 0
    assert manifest["files"]
    columns = WAVEFORM_COLUMNS if experiment in ("papr_ccdf", "oob_psd") else LINK_COLUMNS
    for name in manifest["files"]:
        rows = read_csv(target / name)
        assert rows[0] == columns
        assert len(rows) > 1


def test_ber_files_and_summary(tmp_path, capsys):
    path = write_scenario(tmp_path, "uncoded_ber")
    main(["run", str(path), "--out-dir", str(tmp_path)])
    files = json.loads((tmp_path / "t_uncoded_ber" / "manifest.json").read_text())["files"]
    assert sorted(files) == sorted(f"ber_pi2_bpsk_{e}_{k}.csv" for e in ("mmse", "zf")
                                   for k in ("sim", "theory"))
    summary = json.loads((tmp_path / "t_uncoded_ber" / "manifest.json").read_text())["summary"]
    assert "zf_resampled" in summary["ber_pi2_bpsk_zf_sim.csv"]


def test_papr_summary(tmp_path, capsys):
    path = write_scenario(tmp_path, "papr_ccdf")
    main(["run", str(path), "--out-dir", str(tmp_path)])
    summary = json.loads((tmp_path / "t_papr_ccdf" / "manifest.json").read_text())["summary"]
    assert summary["ccdf_qpsk.csv"]["ccdf_1e-3_db"] > summary["ccdf_ro_qpsk_fdss5db.csv"][
        "ccdf_1e-3_db"]


@pytest.mark.parametrize("experiment", ["papr_ccdf", "capacity", "uncoded_ber"])
def test_byte_identical_across_runs_and_threads(experiment, tmp_path, capsys):
    path = write_scenario(tmp_path, experiment)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", str(path), "--out-dir", str(a), "--threads", "1"])
    main(["run", str(path), "--out-dir", str(b), "--threads", "3"])
    files = json.loads((a / f"t_{experiment}" / "manifest.json").read_text())["files"]
    for name in files:
        assert (a / f"t_{experiment}" / name).read_bytes() == \
            (b / f"t_{experiment}" / name).read_bytes()


def test_seed_and_trials_override(tmp_path, capsys):
    path = write_scenario(tmp_path, "capacity")
    main(["run", str(path), "--out-dir", str(tmp_path / "a"), "--seed", "5", "--trials", "7"])
    m = json.loads((tmp_path / "a" / "t_capacity" / "manifest.json").read_text())
    assert m["seed"] == 5
    rows = read_csv(tmp_path / "a" / "t_capacity" / m["files"][0])
    assert rows[1][5:] == ["5", "7"]
    main(["run", str(path), "--out-dir", str(tmp_path / "b"), "--seed", "6"])
    assert (tmp_path / "a" / "t_capacity" / m["files"][0]).read_bytes() != \
        (tmp_path / "b" / "t_capacity" / m["files"][0]).read_bytes()


def test_flat_awgn_sinr_table(tmp_path, capsys):
    assert main(["run", "sinr_flat_awgn", "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sinr_flat_awgn" / "sinr_qpsk_zf.csv")
    assert rows[1][:2] == ["0.0", "1.0"]


def test_export_llrs(tmp_path, capsys):
    out = tmp_path / "llr.csv"
    assert main(["export-llrs", "--seed", "1", "--blocks", "2", "--snr-db", "30",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["block", "bit_index", "bit", "llr"]
    assert len(rows) == 1 + 2 * 24
    # at 30 dB every LLR sign matches its bit
    assert all((float(llr) < 0) == (bit == "1") for _, _, bit, llr in rows[1:])


def test_runtime_error_exit_code(tmp_path, capsys):
    assert main(["export-llrs", "--seed", "1", "--profile", "nowhere.yaml"]) == 1
    assert json.loads(capsys.readouterr().err)["type"] == "ValueError"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dftsofdm", "list"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "fig8_capacity" in proc.stdout
