import json
import sys
from pathlib import Path

import networkx as nx
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from export import ball_from_json, ball_to_json, dumps, graph_from_json, window_dot
from graphs import from_networkx, grow_ball, probe_window
from groups import ball_oracle


def test_window_json_round_trip(f2):
    """Test that a grown window survives writing and reading with radius and frontier intact."""
    ball = grow_ball(ball_oracle(f2), f2.identity(), 2)
    data = ball_to_json(ball)
    again = ball_from_json(json.loads(dumps(data)))

    assert data["radius"] == 2
    assert len(data["frontier"]) == 12
    assert "a^2" in data["frontier"]
    assert ball_to_json(again) == data
    assert again.frontier == ball.frontier
    assert probe_window(again, 1) == probe_window(ball, 1)


def test_window_json_keeps_walls_and_multiplicity():
    """Test that wall edges and parallel edges are written by label."""
    g = nx.Graph()
    g.add_edge("s", "m", multiplicity=3)
    g.add_edge("m", "t")
    ball = from_networkx(g, wall_edges=[("m", "t")])
    data = ball_to_json(ball)

    assert data["edges"] == [["s", "m", 3], ["m", "t", 1]]
    assert data["walls"] == [["m", "t"]]
    assert ball_to_json(graph_from_json(data)) == data


def test_window_json_rejects_a_wrong_frontier(f2):
    """Test that a recorded frontier disagreeing with the depths is refused."""
    data = ball_to_json(grow_ball(ball_oracle(f2), f2.identity(), 1))
    data["frontier"] = ["a"]

    with pytest.raises(ValueError):
        ball_from_json(data)
    data["depth"] = data["depth"][:-1]
    with pytest.raises(ValueError):
        ball_from_json(data)


def test_window_dot_marks_the_frontier(line_window):
    """Test that frontier vertices of a grown window are drawn as double circles."""
    text = window_dot(line_window, "line", highlight=[0])

    assert text.startswith('graph "line" {')
    assert text.count("shape=doublecircle") == 2
    assert '"0" [depth=0,style=filled];' in text
    assert '"4" [depth=4,shape=doublecircle];' in text
    assert "doublecircle" not in window_dot(from_networkx(nx.path_graph(3)))
