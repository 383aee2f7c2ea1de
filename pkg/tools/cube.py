from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import networkx as nx
import typer

from export import emit, graph_from_json, load_json, schema_id, skeleton_dot, skeleton_json, write_text
from pocsets import WIDTH_LIMIT, CubeComplexSkeleton, Pocset, cube, pocset_from_json, tree_halfspace_pocset, width
from runner import run_command


def read_pocset(path: str, tree: bool = False) -> Tuple[Pocset, Optional[nx.Graph]]:
    """
    Read a pocset file, or a graph file that must be a tree when tree is set.

    Raises:
        ValueError: If the file lacks a required key
    """
    data = load_json(path)
    try:
        if tree:
            graph = graph_from_json(data).graph
            return tree_halfspace_pocset(graph), graph
        return pocset_from_json(data), None
    except KeyError as e:
        raise ValueError(f"{path}: missing key {e}")


def build_cube_json(source: str, pocset: Pocset, skeleton: CubeComplexSkeleton,
                    tree: Optional[nx.Graph] = None) -> Dict[str, Any]:
    """Build the cube report from a pocset and its skeleton."""
    info = skeleton_json(skeleton)
    lines = [
        f"{len(skeleton.vertices)} vertices, {len(skeleton.edges)} edges, dimension {skeleton.dimension}",
        "the skeleton is a tree" if info["is_tree"] else "the skeleton is not a tree",
    ]
    result = {
        "schema": schema_id("cube"),
        "source": source,
        "pocset": {
            "elements": len(pocset),
            "pairs": len(pocset.pairs()),
            "transverse_pairs": len(pocset.transverse_pairs()),
            "width": width(pocset) if len(pocset) <= WIDTH_LIMIT else None,
        },
        "skeleton": info,
        "summary": lines,
    }
    if tree is not None:
        result["recovers_tree"] = nx.is_isomorphic(skeleton.graph, tree)
        lines.append("cubing recovers the input tree" if result["recovers_tree"] else "cubing differs from the input tree")
    return result


def compute_cube(path: str, tree: bool, budget: Optional[int]) -> Tuple[Dict[str, Any], str]:
    pocset, graph = read_pocset(path, tree)
    skeleton = cube(pocset, budget=budget)
    return build_cube_json(Path(path).name, pocset, skeleton, graph), skeleton_dot(skeleton, Path(path).stem)


def register(app: typer.Typer) -> None:
    """Register the cube command."""
    @app.command(name="cube")
    def cube_command(
        path: str = typer.Argument(..., help="Pocset JSON file (elements, involution, order)"),
        tree: bool = typer.Option(False, "--tree", help="Read a graph file and cube its tree halfspaces"),
        budget: Optional[int] = typer.Option(None, "--budget", help="Ultrafilter budget"),
        json_out: bool = typer.Option(False, "--json", help="Print the JSON report"),
        dot: Optional[Path] = typer.Option(None, "--dot", help="Write the skeleton as DOT"),
    ) -> None:
        """Cube a finite pocset: vertices are ultrafilters, edges flip one pair."""
        report, text = run_command(f"cube {path}", compute_cube, path, tree, budget)
        emit(report, "cube", json_out)
        if dot is not None:
            write_text(dot, text)
