from kuranishi_atlas.atlas_file import write_atlas
from kuranishi_atlas.cli import EXIT_OK, EXIT_USAGE, run


def test_demo_list(capsys):
    assert run(["demo", "list"]) == EXIT_OK
    assert "zero-linear: signed count +1" in capsys.readouterr().out


def test_unknown_verb():
    assert run(["frobnicate"]) == EXIT_USAGE


def test_validate_demo_atlas(capsys):
    assert run(["validate", "--demo", "circle-basic", "--resolution", "1/32"]) == EXIT_OK
    assert "covering" in capsys.readouterr().out


def test_validate_missing_file(tmp_path):
    assert run(["validate", str(tmp_path / "missing.atlas")]) == EXIT_USAGE


def test_validate_unparsable_file(tmp_path, capsys):
    path = tmp_path / "broken.atlas"
    path.write_text("not an atlas\n")
    assert run(["validate", str(path)]) == EXIT_USAGE
    assert "parse error: line 1" in capsys.readouterr().out


def test_unknown_check():
    assert run(["validate", "--demo", "zero-linear", "--check", "maps,volume"]) == EXIT_USAGE


def test_pipeline_from_file(tmp_path, zero_linear, capsys):
    source = tmp_path / "zero.atlas"
    write_atlas(str(source), zero_linear)
    out = tmp_path / "out"
    code = run(["pipeline", str(source), "--stages", "perturb,count", "--resolution", "1/32", "--seeds", "0",
                "--out", str(out)])
    assert code == EXIT_OK
    assert "signed count +1" in capsys.readouterr().out
    assert (out / "count.csv").exists()
    assert (out / "02-count.atlas").exists()
