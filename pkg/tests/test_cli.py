from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner

from medialfit.cli import app
from medialfit.core.cloud import load_cloud
from medialfit.storage import db
from medialfit.storage.files import read_eval_json, read_spheres

runner = CliRunner()


@pytest.fixture(autouse=True)
def _detach_log_handlers():
    yield
    # les handlers pointent sur le stderr capturé par CliRunner
    logging.getLogger().handlers.clear()


def run(*args: str, code: int = 0):
    result = runner.invoke(app, list(args))
    assert result.exit_code == code, result.output
    return result


def _data_lines(path) -> list[str]:
    return [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]


# ── generate ──────────────────────────────────────────────────────────────────
def test_generate_clean_circle():
    run("generate", "circle", "--n", "512", "-o", "c.pts")
    lines = _data_lines("c.pts")
    assert len(lines) == 512
    cloud = load_cloud("c.pts", 2)
    np.testing.assert_allclose(cloud.normals, cloud.points, atol=1e-9)
    assert Path("c.poly").exists()
    manifest = json.loads(Path("c.pts.manifest.json").read_text())
    assert manifest["command"] == "generate"
    assert set(manifest["outputs"]) == {"c.pts", "c.poly"}
    assert db.counts() == 1


def test_generate_is_deterministic():
    run("generate", "star", "--n", "300", "--sigma", "1", "--seed", "7", "-o", "a.pts")
    run("generate", "star", "--n", "300", "--sigma", "1", "--seed", "7", "-o", "b.pts")
    assert Path("a.pts").read_bytes() == Path("b.pts").read_bytes()


def test_generate_outliers_replace_exact_count():
    run("generate", "star", "--n", "500", "-o", "clean.pts")
    run("generate", "star", "--n", "500", "--outliers", "0.1", "-o", "dirty.pts")
    a, b = _data_lines("clean.pts"), _data_lines("dirty.pts")
    assert sum(x != y for x, y in zip(a, b)) == 50


def test_generate_shape_param_and_3d():
    run("generate", "star", "--n", "64", "-p", "arms=3", "-o", "s3.pts")
    run("generate", "sphere", "--n", "200", "-o", "ball.pts")
    assert load_cloud("ball.pts", 3).dim == 3
    assert not Path("ball.poly").exists()


@pytest.mark.parametrize(
    "args",
    [
        ("generate", "torus", "-o", "t.pts"),
        ("generate", "circle", "-p", "radius", "-o", "t.pts"),
        ("generate", "circle", "--sigma", "-1", "-o", "t.pts"),
        ("generate", "circle", "--mode", "sideways", "-o", "t.pts"),
    ],
)
def test_generate_bad_input(args):
    run(*args, code=2)


# ── solve ─────────────────────────────────────────────────────────────────────
def test_solve_shrink_on_clean_circle():
    run("generate", "circle", "--n", "256", "-o", "c.pts")
    run("solve", "c.pts", "-m", "shrink", "-o", "c.shrink.csv")
    table = read_spheres("c.shrink.csv")
    assert table.method == "shrink" and len(table) == 256
    np.testing.assert_allclose(table.radii, 1.0, atol=1e-3)
    assert Path("c.shrink.csv.manifest.json").exists()


def test_solve_is_thread_independent():
    run("generate", "circle", "--n", "64", "--sigma", "0.5", "-o", "c.pts")
    run("solve", "c.pts", "--sigma", "0.5", "--max-iters", "5", "-j", "1", "-o", "one.csv")
    run("solve", "c.pts", "--sigma", "0.5", "--max-iters", "5", "-j", "4", "-o", "four.csv")
    assert Path("one.csv").read_bytes() == Path("four.csv").read_bytes()


def test_solve_writes_trace():
    run("generate", "circle", "--n", "48", "-o", "c.pts")
    run("solve", "c.pts", "--max-iters", "4", "--trace-every", "2", "-o", "c.csv")
    text = Path("c.trace.csv").read_text()
    assert text.startswith("# medialfit-trace v1 dim=2")
    assert len(_data_lines("c.trace.csv")) == 1 + 3 * 48


def test_solve_exit_codes():
    run("solve", "missing.pts", code=4)
    Path("bad.pts").write_text("0 0 1\n")
    run("solve", "bad.pts", code=2)
    Path("ok.pts").write_text("0 1 0 1\n0 -1 0 -1\n")
    run("solve", "ok.pts", "--inscription", "sideways", code=2)
    run("solve", "ok.pts", "--dim", "4", code=2)


def test_failed_atoms_are_not_scored(monkeypatch):
    from medialfit.core import solver
    from medialfit.core.errors import SingularSystem

    iterate = solver._iterate

    def flaky(pin, *args, **kwargs):
        if pin == 0:
            raise SingularSystem("forcé")
        return iterate(pin, *args, **kwargs)

    monkeypatch.setattr(solver, "_iterate", flaky)
    run("generate", "circle", "--n", "48", "-o", "c.pts")
    run("solve", "c.pts", "--max-iters", "3", "--trace-every", "1", "-o", "c.csv")
    table = read_spheres("c.csv")
    assert len(table) == 47 and 0 not in table.pin_index
    assert len(_data_lines("c.trace.csv")) == 1 + 4 * 47
    run("eval", "c.csv", "c.poly", "-r", "128")
    assert read_eval_json("c.eval.json").n_atoms == 47


# ── eval ──────────────────────────────────────────────────────────────────────
def test_eval_shrink_on_circle():
    run("generate", "circle", "--n", "256", "-o", "c.pts")
    run("solve", "c.pts", "-m", "shrink", "-o", "c.csv")
    run("eval", "c.csv", "c.poly", "-r", "256")
    report = read_eval_json("c.eval.json")
    assert report.n_atoms == 256
    assert report.e_avg <= 1.0
    assert Path("c.eval.json.manifest.json").exists()


def test_eval_bad_input():
    run("eval", code=2)
    Path("s3.csv").write_text("# medialfit-spheres v1 dim=3\npin_index,cx,cy,cz,r,iterations,converged\n0,0,0,0,1,1,1\n")
    Path("sq.poly").write_text("0 0\n1 0\n1 1\n0 1\n")
    run("eval", "s3.csv", "sq.poly", code=2)
    Path("s2.csv").write_text("pin_index,cx,cy,r,iterations,converged\n")
    run("eval", "s2.csv", "sq.poly", code=2)


# ── render ────────────────────────────────────────────────────────────────────
def test_render_svg():
    run("generate", "rectangle", "--n", "128", "-o", "r.pts")
    run("solve", "r.pts", "-m", "shrink", "-o", "r.shrink.csv")
    run("render", "r.pts", "r.shrink.csv")
    svg = Path("r.shrink.svg").read_text()
    assert 'id="union"' in svg and 'id="points"' in svg


def test_render_dimension_mismatch():
    run("generate", "circle", "--n", "32", "-o", "c.pts")
    Path("s3.csv").write_text("# medialfit-spheres v1 dim=3\npin_index,cx,cy,cz,r,iterations,converged\n")
    run("render", "c.pts", "s3.csv", code=2)


# ── replay & registre ─────────────────────────────────────────────────────────
def test_replay_reproduces_outputs():
    run("generate", "star", "--n", "200", "--sigma", "1", "--seed", "3", "-o", "s.pts")
    run("solve", "s.pts", "-m", "shrink", "-o", "s.csv")
    run("replay", "s.pts.manifest.json")
    run("replay", "s.csv.manifest.json")


def test_replay_detects_changed_output():
    run("generate", "circle", "--n", "64", "-o", "c.pts")
    path = Path("c.pts.manifest.json")
    manifest = json.loads(path.read_text())
    manifest["outputs"]["c.pts"] = "0" * 40
    path.write_text(json.dumps(manifest))
    run("replay", str(path), code=3)


def test_replay_missing_input():
    run("generate", "circle", "--n", "64", "-o", "c.pts")
    run("solve", "c.pts", "-m", "shrink", "-o", "c.csv")
    Path("c.pts").unlink()
    run("replay", "c.csv.manifest.json", code=4)


def test_manifest_argv_keeps_positionals_bare():
    run("generate", "circle", "--n", "64", "-o", "c.pts")
    argv = json.loads(Path("c.pts.manifest.json").read_text())["argv"]
    assert argv[:2] == ["generate", "circle"]
    assert "shape" not in argv
    run("solve", "c.pts", "-m", "shrink", "-o", "c.csv")
    argv = json.loads(Path("c.csv.manifest.json").read_text())["argv"]
    assert argv[:2] == ["solve", "c.pts"]


def test_runs_and_reset():
    run("generate", "circle", "--n", "32", "-o", "c.pts")
    run("generate", "circle", "--n", "32", "-o", "d.pts")
    result = run("runs", "--limit", "5")
    assert "generate" in result.output
    run("runs-reset")
    assert db.counts() == 0


def test_runs_detail_by_id():
    run("generate", "circle", "--n", "32", "-o", "c.pts")
    run_id = db.recent_runs(1)[0][0]
    result = run("runs", "--id", str(run_id))
    assert "generate circle" in result.output
    assert "c.pts" in result.output and "c.poly" in result.output
    run("runs", "--id", str(run_id + 100), code=2)


# ── environnement ─────────────────────────────────────────────────────────────
def test_env_commands(monkeypatch):
    run("env-example")
    assert "MEDIALFIT_THREADS=" in Path(".env.example").read_text()
    run("env-check")
    monkeypatch.setenv("MEDIALFIT_LOG_LEVEL", "loud")
    run("env-check", code=2)
