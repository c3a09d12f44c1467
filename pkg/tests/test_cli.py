import hashlib
import json
from pathlib import Path

import pytest

from vtprune.cli import main, parse_sweep


def _tiny_corpus(tmp_path, name="corpus", videos=3):
    out = tmp_path / name
    rc = main([
        "generate", "--out", str(out), "--videos", str(videos),
        "--frames", "8", "--tokens", "16", "--channels", "16", "--scenes", "2", "--seed", "5",
    ])
    assert rc == 0
    return out


def _dir_digest(path: Path) -> str:
    h = hashlib.sha256()
    for f in sorted(path.rglob("*")):
        if f.is_file():
            h.update(f.name.encode())
            h.update(f.read_bytes())
    return h.hexdigest()


def test_generate_default_counts(shipped_corpus):
    assert len(list(shipped_corpus.glob("*.pvtg"))) == 10
    assert len(list(shipped_corpus.glob("*.truth.json"))) == 10


def test_generate_deterministic(tmp_path):
    a = _tiny_corpus(tmp_path, "a")
    b = _tiny_corpus(tmp_path, "b")
    assert _dir_digest(a) == _dir_digest(b)


def test_generate_rejects_bad_fraction(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--out", str(tmp_path / "x"), "--static-fraction", "1.1"])
    assert exc.value.code == 2


def test_run_manifest_reproducible(tmp_path):
    corpus = _tiny_corpus(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    for out in (out1, out2):
        assert main(["run", "--corpus", str(corpus), "--out", str(out)]) == 0
    run1 = next(out1.glob("run-*"))
    run2 = next(out2.glob("run-*"))
    assert run1.name == run2.name
    for rel in ("manifest.json", "reports.json", "reports.csv"):
        assert (run1 / rel).read_bytes() == (run2 / rel).read_bytes()


def test_run_identity_flags_full_ratio(tmp_path):
    corpus = _tiny_corpus(tmp_path)
    out = tmp_path / "out"
    rc = main(["run", "--corpus", str(corpus), "--out", str(out),
               "--alpha", "1.0", "--tau", "2.0", "--beta", "1.0"])
    assert rc == 0
    manifest = json.loads((next(out.glob("run-*")) / "manifest.json").read_text())
    assert manifest["aggregate"]["mean_retained_ratio"] == 1.0
    assert manifest["aggregate"]["mean_flops_multiplier"] == 1.0
    for report in manifest["reports"]:
        assert report["retained_ratio"] == 1.0
        assert report["flops_multiplier"] == 1.0


def test_run_skips_malformed_and_exits_nonzero(tmp_path):
    corpus = _tiny_corpus(tmp_path)
    (corpus / "broken.pvtg").write_bytes(b"JUNKJUNKJUNK")
    out = tmp_path / "out"
    rc = main(["run", "--corpus", str(corpus), "--out", str(out)])
    assert rc == 1
    manifest = json.loads((next(out.glob("run-*")) / "manifest.json").read_text())
    assert [s["video"] for s in manifest["skipped"]] == ["broken"]
    assert len(manifest["reports"]) == 3


def test_run_all_malformed_fails(tmp_path):
    corpus = tmp_path / "bad"
    corpus.mkdir()
    (corpus / "only.pvtg").write_bytes(b"XXXX")
    assert main(["run", "--corpus", str(corpus), "--out", str(tmp_path / "o")]) == 1


def test_run_config_file_with_flag_override(tmp_path):
    corpus = _tiny_corpus(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 0.2, "m_layer": 4}))
    out = tmp_path / "out"
    assert main(["run", "--corpus", str(corpus), "--out", str(out), "--config", str(cfg),
                 "--alpha", "0.6"]) == 0
    manifest = json.loads((next(out.glob("run-*")) / "manifest.json").read_text())
    assert manifest["config"]["alpha"] == 0.6  # flag wins
    assert manifest["config"]["m_layer"] == 4  # file applies


def test_parse_sweep():
    axes = parse_sweep("alpha=0.1:0.3:0.1,m=2:6:2")
    assert axes[0][0] == "alpha"
    assert axes[0][1] == pytest.approx([0.1, 0.2, 0.3])
    assert axes[1] == ("m_layer", [2, 4, 6])
    with pytest.raises(ValueError):
        parse_sweep("bogus=1:2:1")
    with pytest.raises(ValueError):
        parse_sweep("alpha=0.1:0.3")


def test_parse_sweep_full_grid_axes():
    axes = parse_sweep("alpha=0.1:0.9:0.1,m=2:11:1")
    assert axes[0][1] == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    assert axes[1][1] == list(range(2, 12))


def test_run_sweep_grid(tmp_path):
    corpus = _tiny_corpus(tmp_path, videos=2)
    out = tmp_path / "out"
    rc = main(["run", "--corpus", str(corpus), "--out", str(out),
               "--sweep", "alpha=0.2:0.4:0.2,m=2:4:2"])
    assert rc == 0
    run_dir = next(out.glob("run-*"))
    sweep = json.loads((run_dir / "sweep.json").read_text())
    assert len(sweep["points"]) == 4
    params = {(p["params"]["alpha"], p["params"]["m_layer"]) for p in sweep["points"]}
    assert params == {(0.2, 2), (0.2, 4), (0.4, 2), (0.4, 4)}
    csv_lines = (run_dir / "sweep.csv").read_text().strip().splitlines()
    assert len(csv_lines) == 5


def test_run_workers_match_sequential(tmp_path):
    corpus = _tiny_corpus(tmp_path, videos=2)
    out1, out2 = tmp_path / "s", tmp_path / "p"
    assert main(["run", "--corpus", str(corpus), "--out", str(out1)]) == 0
    assert main(["run", "--corpus", str(corpus), "--out", str(out2), "--workers", "2"]) == 0
    m1 = (next(out1.glob("run-*")) / "manifest.json").read_bytes()
    m2 = (next(out2.glob("run-*")) / "manifest.json").read_bytes()
    assert m1 == m2


def test_run_trace_flag_writes_traces(tmp_path):
    corpus = _tiny_corpus(tmp_path, videos=2)
    out = tmp_path / "out"
    assert main(["run", "--corpus", str(corpus), "--out", str(out), "--trace"]) == 0
    run_dir = next(out.glob("run-*"))
    traces = list((run_dir / "videos").glob("*.trace.json"))
    assert len(traces) == 2
    payload = json.loads(traces[0].read_text())
    assert {"raw_tokens", "merged_tokens", "segments"} <= payload.keys()


def test_visualize_writes_segment_images(tmp_path):
    corpus = _tiny_corpus(tmp_path, videos=1)
    out = tmp_path / "out"
    assert main(["run", "--corpus", str(corpus), "--out", str(out)]) == 0
    run_dir = next(out.glob("run-*"))
    assert main(["visualize", "--run", str(run_dir), "--video", "video_000"]) == 0
    export = json.loads((run_dir / "videos" / "video_000.json").read_text())
    images = sorted((run_dir / "viz").glob("video_000_segment*.png"))
    assert len(images) == len(export["segments"])


def test_visualize_missing_export_fails(tmp_path):
    corpus = _tiny_corpus(tmp_path, videos=1)
    out = tmp_path / "out"
    assert main(["run", "--corpus", str(corpus), "--out", str(out)]) == 0
    run_dir = next(out.glob("run-*"))
    assert main(["visualize", "--run", str(run_dir), "--video", "nope"]) == 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["run"])  # missing --corpus
    assert exc.value.code == 2
