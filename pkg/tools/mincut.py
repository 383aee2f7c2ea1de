from pathlib import Path
from typing import Any, Dict, List, Optional

import typer

from chopping import multiedge_modify
from export import emit, graph_from_json, load_json, schema_id, window_dot, write_text
from graphs import BallGraph, Cut, make_cut, min_vertex_set_cut
from runner import run_command


def resolve_vertices(ball: BallGraph, names: str) -> List[int]:
    """Window ids of a comma-separated list of vertex labels."""
    index = {label: i for i, label in enumerate(ball.labels)}
    ids = []
    for name in (n.strip() for n in names.split(",")):
        if name not in index:
            raise ValueError(f"unknown vertex {name!r}")
        ids.append(index[name])
    return ids


def cut_json(ball: BallGraph, cut: Cut) -> Dict[str, Any]:
    return {
        "boundary_size": cut.boundary_size,
        "wall_weight": cut.wall_weight,
        "connected": cut.connected,
        "side": ball.side_labels(cut.side),
        "boundary": [[ball.labels[u], ball.labels[v], m] for u, v, m in cut.boundary],
    }


def build_mincut_json(source: str, ball: BallGraph, sources: List[int], sinks: List[int], cut: Cut,
                      multiedge: Optional[int] = None) -> Dict[str, Any]:
    """Build the mincut report, with the cut remeasured after wall multiplication when asked."""
    result = {
        "schema": schema_id("mincut"),
        "graph": source,
        "sources": [ball.labels[v] for v in sources],
        "sinks": [ball.labels[v] for v in sinks],
        "cut": cut_json(ball, cut),
        "summary": [f"minimum cut {cut.boundary_size} (wall weight {cut.wall_weight})"],
    }
    if multiedge is not None:
        modified = multiedge_modify(ball, multiedge, [cut])
        again = make_cut(modified, cut.side)
        result["multiedge"] = {"factor": multiedge, "boundary_size": again.boundary_size}
        result["summary"].append(f"with walls multiplied by {multiedge}: boundary {again.boundary_size}")
    return result


def compute_mincut(path: str, src: str, dst: str, multiedge: Optional[int]):
    ball = graph_from_json(load_json(path))
    sources, sinks = resolve_vertices(ball, src), resolve_vertices(ball, dst)
    cut = min_vertex_set_cut(ball, sources, sinks)
    return build_mincut_json(Path(path).name, ball, sources, sinks, cut, multiedge), window_dot(ball, Path(path).stem, cut.side)


def register(app: typer.Typer) -> None:
    """Register the mincut command."""
    @app.command()
    def mincut(
        path: str = typer.Argument(..., help="Graph JSON file (vertices, edges, walls)"),
        src: str = typer.Argument(..., help="Source vertices, comma separated"),
        dst: str = typer.Argument(..., help="Sink vertices, comma separated"),
        multiedge: Optional[int] = typer.Option(None, "--multiedge", help="Also remeasure with every wall edge repeated n times"),
        json_out: bool = typer.Option(False, "--json", help="Print the JSON report"),
        dot: Optional[Path] = typer.Option(None, "--dot", help="Write the graph with the source side filled"),
    ) -> None:
        """Minimum edge cut between two vertex sets, multiplicities counted."""
        report, text = run_command(f"mincut {path}", compute_mincut, path, src, dst, multiedge)
        emit(report, "mincut", json_out)
        if dot is not None:
            write_text(dot, text)
