import json

import pytest

from majorcom.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_enumerate_counts(capsys):
    code, out, _ = run(capsys, "--config", "rate", "enumerate")
    assert code == 0
    values = dict(line.split("=") for line in out.splitlines())
    assert values["frequency_sets"] == "45"
    assert values["allocations"] == "6"
    assert values["codewords"] == "270"
    assert float(values["upper_bound_bits"]) == pytest.approx(8.0768155970508)


def test_global_flags_after_subcommand(capsys, tmp_path):
    code, _, _ = run(capsys, "enumerate", "--config", "rate", "--out", str(tmp_path / "e.csv"))
    assert code == 0
    assert (tmp_path / "e.csv").read_text().startswith("# majorcom enumerate v1\n")


@pytest.mark.parametrize("decoder", ["ml", "iter-greedy"])
def test_encode_decode_round_trip(capsys, tmp_path, decoder):
    rx = tmp_path / "rx.json"
    assert run(capsys, "--seed", "4", "encode", "--hex", "DEADbeef01", "--out", str(rx))[0] == 0
    doc = json.loads(rx.read_text())
    assert doc["n_bits"] == 40 and len(doc["blocks"]) == 5
    code, out, _ = run(capsys, "decode", "--in", str(rx), "--decoder", decoder)
    assert code == 0 and out.strip() == "deadbeef01"


def test_error_line_format(capsys, tmp_path):
    code, _, err = run(capsys, "decode", "--in", str(tmp_path / "missing.json"))
    assert code != 0
    assert err.startswith("error: kind=io msg=") and err.count("\n") == 1
    code, _, err = run(capsys, "encode", "--hex", "xyz")
    assert code != 0 and err.startswith("error: kind=value msg=")
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and err.startswith("error: kind=usage msg=")
    bad = tmp_path / "bad.toml"
    bad.write_text("[system\n")
    code, _, err = run(capsys, "--config", str(bad), "enumerate")
    assert code != 0 and err.startswith("error: kind=config msg=")


def test_ber_subcommand(capsys, tmp_path):
    out = tmp_path / "ber.csv"
    code, _, _ = run(capsys, "ber", "--trials", "200", "--snr-db=-8,60", "--decoders", "ml,noniter-greedy",
                     "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# majorcom ber v1" and len(lines) == 2 + 4


def test_codebook_design_and_use(capsys, tmp_path):
    path = tmp_path / "cb.txt"
    assert run(capsys, "codebook", "design", "--n-b", "8", "--out", str(path))[0] == 0
    text = path.read_text().splitlines()
    assert text[1] == "L_R=8 K=2 L_K=4 N_b=8" and len(text) == 10
    cfg = tmp_path / "study.toml"
    cfg.write_text(
        "[system]\nn_tx = 8\nn_samples = 70\n"
        f'[experiment]\ncodebook = "{path.name}"\ntrials = 100\nsnr_db = [0.0]\ndecoders = ["ml"]\n')
    code, out, _ = run(capsys, "--config", str(cfg), "ber")
    assert code == 0 and ",7,0.0,ml,0,700," in out


def test_codebook_study_subcommand(capsys, tmp_path):
    code, out, _ = run(capsys, "codebook", "study", "--trials", "300", "--snr-db=-16", "--n-b", "2,8",
                       "--scatter", str(tmp_path / "s.csv"))
    assert code == 0
    assert len(out.splitlines()) == 2 + 2
    assert (tmp_path / "s.csv").read_text().startswith("# majorcom distance v1\n")
