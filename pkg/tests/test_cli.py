import csv
import json

import numpy as np
import pytest

from ultraindex import cli


def run(tmp_path, *args):
    return cli.main(["--out", str(tmp_path), *args])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_spectrum2d_lossless(tmp_path):
    assert run(tmp_path, "spectrum2d", "--d", "0.1", "--points", "400") == 0
    rows = read_csv(tmp_path / "spectrum2d.csv")
    assert len(rows) == 400
    assert max(abs(float(r["R_plus_T"]) - 1) for r in rows) < 1e-12
    meta = json.loads((tmp_path / "spectrum2d.json").read_text())
    assert meta["schema_version"] == cli.SCHEMA_VERSION and meta["settings"]["points"] == 400
    assert meta["config_hash"] == cli.config_hash("spectrum2d", meta["settings"])
    assert "numpy" in meta["provenance"] and "library_version" in meta


def test_band3d_and_invert_map(tmp_path):
    assert run(tmp_path, "band3d", "--d", "0.01", "--n-points", "50") == 0
    assert len(read_csv(tmp_path / "band3d.csv")) == 50
    assert run(tmp_path, "invert-map", "--n-aspect", "4", "--n-d", "5", "--n-scan", "201") == 0
    rows = read_csv(tmp_path / "invert-map.csv")
    assert len(rows) == 20 and {"is_invertible", "ev_ratio"} <= set(rows[0])


def test_chem_params_and_slab_check(tmp_path):
    assert run(tmp_path, "chem-params", "--d-a0", "10,50", "--with-chi", "false") == 0
    rows = read_csv(tmp_path / "chem-params.csv")
    assert [float(r["d_over_a0"]) for r in rows] == [10.0, 50.0]
    assert run(tmp_path, "slab-check") == 0
    rows = read_csv(tmp_path / "slab-check.csv")
    assert {"k0dz", "M", "n_re", "n_im", "err_t", "err_r"} <= set(rows[0])


def test_chi_small(tmp_path, tmp_cache):
    assert run(tmp_path, "chi", "--d", "0.05", "--max-sites", "2000") == 0
    rows = read_csv(tmp_path / "chi.csv")
    assert float(rows[0]["im_chi0"]) > 0 and float(rows[0]["gamma_d"]) > 0
    assert float(rows[0]["achieved_r_cutoff"]) > 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("d = 0.05\npoints = 11\n")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path), "spectrum2d", "--points", "7"]) == 0
    meta = json.loads((tmp_path / "spectrum2d.json").read_text())
    assert meta["settings"]["d"] == 0.05 and meta["settings"]["points"] == 7


def test_config_errors_aggregated(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('bogus = 1\nchi_mode = "magic"\nn_delta = "many"\n')
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path), "figure6a"]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "bogus" in err and "chi_mode" in err and "n_delta" in err
    nested = tmp_path / "nested.toml"
    nested.write_text("[table]\nx = 1\n")
    assert cli.main(["--config", str(nested), "spectrum2d"]) == cli.EXIT_CONFIG
    assert cli.main(["--config", str(tmp_path / "missing.toml"), "spectrum2d"]) == cli.EXIT_CONFIG


def test_compute_error_names_module(tmp_path, capsys):
    assert run(tmp_path, "chem-params", "--d-a0", "5") == cli.EXIT_COMPUTE
    assert "ultraindex.chemistry" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("ULTRAINDEX_OUT", str(tmp_path / "envout"))
    assert cli.main(["spectrum2d", "--points", "5"]) == 0
    assert (tmp_path / "envout" / "spectrum2d.csv").exists()


def test_figure6a_without_chemistry(tmp_path):
    assert run(tmp_path, "figure6a", "--chi-mode", "none", "--d-min-a0", "100", "--n-d", "3",
               "--n-delta", "64") == 0
    rows = read_csv(tmp_path / "figure6a.csv")
    assert len(rows) == 3
    nre = np.array([float(r["n_re"]) for r in rows])
    nqo = np.array([float(r["n_quantum_optics"]) for r in rows])
    assert np.all(nre <= nqo) and np.all(nre > 0.95 * nqo)


def test_figure6b_unreachable_row(tmp_path):
    assert run(tmp_path, "figure6b", "--chi-mode", "none", "--d-min-a0", "200", "--n-d", "2",
               "--n-delta", "64", "--targets", "2,100", "--gamma-primes", "1") == 0
    rows = read_csv(tmp_path / "figure6b.csv")
    assert len(rows) == 2
    assert rows[0]["error"] == "" and float(rows[0]["n_re"]) == pytest.approx(2, rel=5e-3)
    assert "unreachable" in rows[1]["error"] and rows[1]["n_im"] == "nan"


def test_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["--out", str(out), "band3d", "--n-points", "30"]) == 0
    for name in ("band3d.csv", "band3d.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_validate_subset(tmp_path, capsys):
    assert run(tmp_path, "validate", "--profile", "smoke", "--only", "10,11") == 0
    out = capsys.readouterr().out
    assert "[PASS] 10" in out and "[PASS] 11" in out
    assert len(read_csv(tmp_path / "validate.csv")) == 2


@pytest.mark.slow
def test_figure6a_peak_smoke_budget(tmp_path):
    assert run(tmp_path, "figure6a", "--gamma-prime", "0", "--d-max-a0", "40", "--n-d", "12",
               "--n-delta", "256", "--chi-anchors", "6,8,11,15", "--chi-max-sites", "20000") == 0
    rows = read_csv(tmp_path / "figure6a.csv")
    nre = np.array([float(r["n_re"]) for r in rows])
    k = int(np.nanargmax(nre))
    assert 0 < k < len(nre) - 1
    assert nre[k] == pytest.approx(30, rel=0.3)
