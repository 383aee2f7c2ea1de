import json
import sys
from pathlib import Path

import pytest
from typer.testing import CliRunner

sys.path.insert(0, str(Path(__file__).parent.parent))

from cli import app


@pytest.fixture
def runner():
    return CliRunner()


def test_ends_of_the_integers(runner):
    """Test that the ends command counts two stable ends for Z."""
    result = runner.invoke(app, ["ends", "z"])

    assert result.exit_code == 0
    assert "Z: 2 ends (stable)" in result.output


def test_ends_json_is_deterministic(runner):
    """Test that two runs print byte-identical JSON."""
    first = runner.invoke(app, ["ends", "z", "--json"])
    second = runner.invoke(app, ["ends", "z", "--json"])

    assert first.exit_code == 0
    assert first.output == second.output
    report = json.loads(first.output)
    assert report["schema"] == "splitkit.ends/1"
    assert report["target"] == "group"
    assert report["windows"]["Z"]["unbounded_count"] == 2


def test_ends_of_halfspaces(runner):
    """Test that a splitting scenario probes both halfspaces."""
    result = runner.invoke(app, ["ends", "f2free", "-R", "3", "--json"])

    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["target"] == "halfspace"
    assert sorted(report["windows"]) == ["left", "right"]
    assert report["windows"]["left"]["unbounded_count"] == 6


def test_mincut_of_k4(runner, fixtures_dir):
    """Test the mincut command on the complete graph on four vertices."""
    result = runner.invoke(app, ["mincut", str(fixtures_dir / "k4.json"), "0", "3"])

    assert result.exit_code == 0
    assert "minimum cut 3 (wall weight 0)" in result.output


def test_cube_of_fixtures(runner, fixtures_dir, tmp_path):
    """Test the cube command on the path and square pocsets."""
    dot = tmp_path / "path.dot"
    path = runner.invoke(app, ["cube", str(fixtures_dir / "path_tree.json"), "--dot", str(dot)])
    square = runner.invoke(app, ["cube", str(fixtures_dir / "square.json")])

    assert path.exit_code == 0
    assert "4 vertices, 3 edges, dimension 1" in path.output
    assert "the skeleton is a tree" in path.output
    assert dot.read_text().startswith('graph "path_tree" {')
    assert square.exit_code == 0
    assert "dimension 2" in square.output
    assert "the skeleton is not a tree" in square.output


def test_chop_stops_on_two_ended_edge_groups(runner):
    """Test that chopping BS(1,2) stops at once with a cited note."""
    result = runner.invoke(app, ["chop", "bs12", "-R", "3"])

    assert result.exit_code == 0
    assert "no chop needed" in result.output
    assert result.output.rstrip().endswith("terminated")


def test_check_reports_patterns(runner):
    """Test that the check command recognises the commuting stable letter."""
    result = runner.invoke(app, ["check", "example83", "-R", "2"])

    assert result.exit_code == 0
    assert "central stable letter pattern: matched" in result.output


@pytest.mark.parametrize("args,code", [
    (["ends", "no_such_fixture"], 1),
    (["ends", "z", "-r", "3", "-R", "2"], 1),
    (["ends", "example83"], 2),
    (["ends", "z", "--budget", "3"], 3),
    (["chop", "z"], 1),
])
def test_exit_codes(runner, args, code):
    """Test that failures map to input, capability and limit exit codes."""
    result = runner.invoke(app, args)

    assert result.exit_code == code
    assert "error:" in result.output


def test_mincut_with_multiplied_walls(runner, fixtures_dir):
    """Test that cuts avoiding the walls keep their size after multiplication."""
    result = runner.invoke(app, ["mincut", str(fixtures_dir / "ladder.json"), "s", "t", "--multiedge", "3"])

    assert result.exit_code == 0
    assert "minimum cut 2 (wall weight 0)" in result.output
    assert "with walls multiplied by 3: boundary 2" in result.output


def test_chop_refuses_free_products(runner):
    """Test that chopping F2 = Z * Z ends cleanly with a note instead of a pocset error."""
    result = runner.invoke(app, ["chop", "f2free", "-R", "3"])

    assert result.exit_code == 0
    assert "no chop: Za*Zb splits over the trivial group" in result.output
    assert result.output.rstrip().endswith("not terminated")


def test_check_quotes_nonzero_h2_for_the_double(runner):
    """Test that the double across Z^3 * F2 quotes the nonzero H^2(G,ZG) conclusion."""
    result = runner.invoke(app, ["check", "example84"])

    assert result.exit_code == 0
    assert "double pattern: matched" in result.output
    assert "H^2(G,ZG) != 0" in result.output


def test_ends_saves_windows(runner, tmp_path):
    """Test that saved windows carry radius and frontier and that the DOT marks the frontier."""
    saved = tmp_path / "windows.json"
    dot = tmp_path / "windows.dot"
    result = runner.invoke(app, ["ends", "z", "-R", "3", "--save-windows", str(saved), "--dot", str(dot)])

    assert result.exit_code == 0
    windows = json.loads(saved.read_text())
    assert windows["Z"]["radius"] == 3
    assert windows["Z"]["frontier"] == ["z^3", "z^-3"]
    assert "shape=doublecircle" in dot.read_text()
