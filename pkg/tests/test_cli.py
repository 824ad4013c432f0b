import csv
import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from binaqual.audio_io import AudioBuffer, read_wav, write_wav
from binaqual.cli import main

from conftest import noise_stereo


def schema(name):
    return json.loads(resources.files("binaqual").joinpath("schemas", name).read_text())


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def assert_error_line(err, category):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith(f"error: {category}: ")


@pytest.fixture
def pair(tmp_path):
    write_wav(noise_stereo(1), tmp_path / "ref.wav", "24")
    samples = np.array(noise_stereo(1).samples)
    samples[1] += 0.05 * np.random.default_rng(5).standard_normal(samples.shape[1])
    write_wav(AudioBuffer(np.clip(samples, -1, 1), 48000), tmp_path / "test.wav", "24")
    return tmp_path / "ref.wav", tmp_path / "test.wav"


def test_compare_identity(capsys, pair):
    code, out, _ = run(capsys, "compare", pair[0], pair[0])
    assert code == 0
    assert out.strip() == "LS=1.000000000 NSIM_L=1.000000000 NSIM_R=1.000000000"


def test_compare_json(capsys, pair):
    code, out, _ = run(capsys, "compare", pair[0], pair[1], "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("compare.schema.json"))
    assert code == 0
    # nine significant digits on each factor bounds the product mismatch
    assert doc["ls"] == pytest.approx(doc["nsim_left"] * doc["nsim_right"], rel=2e-8)
    assert doc["nsim_left"] == 1.0 and doc["ls"] < 1.0


def test_compare_diagnostics(capsys, pair):
    code, out, _ = run(capsys, "compare", pair[0], pair[1], "--diagnostics", "--align-search", "1")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("compare.schema.json"))
    assert len(doc["diagnostics"]["right"]["patch_scores"]) == 4


def test_compare_rate_mismatch(capsys, pair, tmp_path):
    write_wav(AudioBuffer(noise_stereo(1).samples, 44100), tmp_path / "r441.wav")
    code, _, err = run(capsys, "compare", pair[0], tmp_path / "r441.wav")
    assert code == 2
    assert_error_line(err, "sample-rate-mismatch")
    assert "sample rate" in err


def test_compare_missing_and_malformed(capsys, pair, tmp_path):
    code, _, err = run(capsys, "compare", pair[0], tmp_path / "missing.wav")
    assert code == 2
    assert_error_line(err, "io-failure")
    (tmp_path / "junk.wav").write_bytes(b"not audio at all")
    code, _, err = run(capsys, "compare", tmp_path / "junk.wav", pair[0])
    assert code == 2
    assert_error_line(err, "malformed-container")


@pytest.mark.parametrize("argv", [[], ["compare"], ["frobnicate"], ["batch", "m.csv", "--jobs", "0"],
                                  ["batch", "m.csv", "--format", "xml"], ["stats", "boxcox", "x.csv", "--column", "a"]])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert_error_line(err, "usage")


def _manifest(tmp_path, rows, scores=False):
    path = tmp_path / "manifest.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ref_path", "test_path", "label", "group"] + (["subjective_score"] if scores else []))
        for r in rows:
            w.writerow(r)
    return path


def test_batch_three_rows(capsys, pair, tmp_path):
    m = _manifest(tmp_path, [["ref.wav", "ref.wav", "a", "g1"], ["ref.wav", "test.wav", "b", "g1"],
                             ["test.wav", "ref.wav", "c", "g2"]])
    code, _, _ = run(capsys, "batch", m, "--out", tmp_path / "rep.csv")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "rep.csv")))
    assert len(rows) == 3 and all(r["status"] == "ok" for r in rows)
    groups = list(csv.DictReader(open(tmp_path / "rep.groups.csv")))
    assert [g["group"] for g in groups] == ["g1", "g2"]


def test_batch_json_with_scores(capsys, pair, tmp_path):
    m = _manifest(tmp_path, [["ref.wav", "ref.wav", "a", "g", 95], ["ref.wav", "test.wav", "b", "g", 40],
                             ["test.wav", "ref.wav", "c", "g", 45]], scores=True)
    code, _, _ = run(capsys, "batch", m, "--format", "json", "--out", tmp_path / "rep.json",
                     "--lambda", "0.5", "--boxcox-epsilon", "1e-9")
    assert code == 0
    doc = json.loads((tmp_path / "rep.json").read_text())
    jsonschema.validate(doc, schema("batch_report.schema.json"))
    assert set(doc["correlations"]) == {"n", "pearson", "spearman"}
    assert doc["boxcox"]["lambda"] == 0.5


def test_batch_partial_failure(capsys, pair, tmp_path):
    m = _manifest(tmp_path, [["ref.wav", "ref.wav", "a", "g"], ["ref.wav", "gone.wav", "b", "g"],
                             ["ref.wav", "test.wav", "c", "g"]])
    code, out, err = run(capsys, "batch", m, "--format", "json")
    assert code == 3
    doc = json.loads(out)
    assert len(doc["rows"]) == 2 and len(doc["failures"]) == 1
    assert err.startswith("error: entry-failed: ")


def test_batch_boxcox_needs_shift_for_zero(capsys, tmp_path):
    write_wav(AudioBuffer(np.full((2, 48000), 0.0), 48000), tmp_path / "z.wav")
    ramp = np.tile(np.linspace(-0.5, 0.5, 48000), (2, 1))
    write_wav(AudioBuffer(ramp, 48000), tmp_path / "r.wav")
    m = _manifest(tmp_path, [["r.wav", "r.wav", "a", "g"]])
    code, _, _ = run(capsys, "batch", m, "--lambda", "0")
    assert code == 0


def test_batch_bad_manifest(capsys, tmp_path):
    code, _, err = run(capsys, "batch", tmp_path / "nothing.csv")
    assert code == 2
    assert_error_line(err, "io-failure")
    (tmp_path / "empty.csv").write_text("ref_path,test_path,label,group\n")
    code, _, err = run(capsys, "batch", tmp_path / "empty.csv")
    assert code == 2
    assert_error_line(err, "empty-manifest")


SYNTH_SPEC = {
    "stimuli": [{"name": "tone", "kind": "pure_tone", "freq_hz": 4000, "duration_s": 2},
                {"name": "white", "kind": "white_noise", "seed": 9}],
    "azimuths_deg": [0, 40],
}


def test_synth_grid_and_lockfile(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SYNTH_SPEC))
    jsonschema.validate(SYNTH_SPEC, schema("fixture_manifest.schema.json"))
    code, out, _ = run(capsys, "synth", spec, "--out-dir", tmp_path / "o1", "--json")
    assert code == 0
    lock = json.loads(out)
    jsonschema.validate(lock, schema("synth_lock.schema.json"))
    assert [f["path"] for f in lock["files"]] == ["tone_azp000.wav", "tone_azp040.wav",
                                                  "white_azp000.wav", "white_azp040.wav"]
    assert json.loads((tmp_path / "o1" / "synth.lock.json").read_text()) == lock
    buf = read_wav(tmp_path / "o1" / "tone_azp000.wav")
    assert buf.channel_count == 2 and buf.n_frames == 96000

    code, out2, _ = run(capsys, "synth", spec, "--out-dir", tmp_path / "o2", "--json")
    assert [f["sha256"] for f in json.loads(out2)["files"]] == [f["sha256"] for f in lock["files"]]


def test_synth_invalid_spec(capsys, tmp_path):
    spec = tmp_path / "bad.json"
    spec.write_text('{"stimuli": [{"kind": "kazoo"}]}')
    code, _, err = run(capsys, "synth", spec, "--out-dir", tmp_path / "o")
    assert code == 2
    assert_error_line(err, "invalid-spec")
    spec.write_text("{not json")
    code, _, err = run(capsys, "synth", spec, "--out-dir", tmp_path / "o")
    assert code == 2
    assert_error_line(err, "invalid-spec")


def test_stats_corr_and_boxcox(capsys, tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("ls,mushra\n1,1\n2,3\n3,2\n4,4\n")
    code, out, _ = run(capsys, "stats", "corr", data, "--x", "ls", "--y", "mushra")
    assert code == 0 and out.strip() == "n=4 pearson=0.8 spearman=0.8"
    code, out, _ = run(capsys, "stats", "corr", data, "--x", "ls", "--y", "mushra", "--json")
    jsonschema.validate(json.loads(out), schema("stats.schema.json"))
    code, out, _ = run(capsys, "stats", "boxcox", data, "--column", "ls", "--lambda", "1", "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, schema("stats.schema.json"))
    assert doc["values"] == [0.0, 1.0, 2.0, 3.0]


def test_stats_errors(capsys, tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("a,b\n0,1\n1,1\n")
    code, _, err = run(capsys, "stats", "corr", data, "--x", "a", "--y", "b")
    assert code == 2
    assert_error_line(err, "degenerate-input")
    code, _, err = run(capsys, "stats", "boxcox", data, "--column", "a", "--lambda", "0.5")
    assert code == 2
    assert_error_line(err, "non-positive-value")
    code, _, err = run(capsys, "stats", "corr", data, "--x", "a", "--y", "zzz")
    assert code == 2
    assert_error_line(err, "invalid-spec")
