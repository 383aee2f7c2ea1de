"""JSON and DOT emission for windows, cube skeletons and command reports."""
import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

import jsonschema
import networkx as nx
import typer
from mcp.server.fastmcp.utilities.logging import get_logger

from graphs import BallGraph, from_networkx, normalize_edge
from pocsets import CubeComplexSkeleton

logger = get_logger(__name__)

SCHEMA_VERSION = 1
SCHEMA_DIR = Path(__file__).parent / "schemas"
REPORT_KINDS = ("ends", "chop", "cube", "mincut", "check")


def schema_id(kind: str) -> str:
    return f"splitkit.{kind}/{SCHEMA_VERSION}"


def dumps(report: Dict[str, Any]) -> str:
    """Canonical JSON text: sorted keys, so equal reports give equal bytes."""
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s (%d bytes)", path, len(text))


def load_json(path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


@lru_cache(maxsize=None)
def load_schema(kind: str) -> Dict[str, Any]:
    if kind not in REPORT_KINDS:
        raise ValueError(f"unknown report kind {kind!r}")
    return load_json(SCHEMA_DIR / f"{kind}.json")


def validate_report(report: Dict[str, Any], kind: str) -> None:
    """
    Check a report against its shipped schema.

    Raises:
        jsonschema.ValidationError: If the report does not match
    """
    jsonschema.validate(instance=report, schema=load_schema(kind))


# windows

def _quote(text: str) -> str:
    return '"' + str(text).replace('"', '\\"') + '"'


def window_dot(ball: BallGraph, name: str = "window", highlight: Iterable[int] = ()) -> str:
    """
    Undirected DOT; wall edges are bold, marked vertices filled, multiplicities become labels.

    Frontier vertices of a grown window (radius above zero) are drawn as double circles.
    """
    marked = set(highlight)
    rim = ball.frontier if ball.radius > 0 else frozenset()
    lines = [f"graph {_quote(name)} {{"]
    for i, label in enumerate(ball.labels):
        style = ",style=filled" if i in marked else ""
        if i in rim:
            style += ",shape=doublecircle"
        lines.append(f"  {_quote(label)} [depth={ball.depth[i]}{style}];")
    for (u, v), m in sorted(ball.edges.items()):
        attrs = []
        if (u, v) in ball.wall_edges:
            attrs.append("style=bold")
        if m > 1:
            attrs.append(f"label={m}")
        suffix = f" [{','.join(attrs)}]" if attrs else ""
        lines.append(f"  {_quote(ball.labels[u])} -- {_quote(ball.labels[v])}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def ball_to_json(ball: BallGraph) -> Dict[str, Any]:
    """A window as labels, depths, labelled edges, walls, radius and frontier."""
    labels = ball.labels
    return {
        "radius": ball.radius,
        "vertices": list(labels),
        "depth": list(ball.depth),
        "edges": [[labels[u], labels[v], m] for (u, v), m in sorted(ball.edges.items())],
        "walls": [[labels[u], labels[v]] for u, v in sorted(ball.wall_edges)],
        "frontier": ball.side_labels(ball.frontier),
    }


def ball_from_json(data: Dict[str, Any]) -> BallGraph:
    """
    Rebuild a window written by ball_to_json; labels become the vertex keys.

    Raises:
        ValueError: If depths, edges or the recorded frontier do not fit the vertices
    """
    labels = tuple(str(v) for v in data["vertices"])
    depth = tuple(int(d) for d in data["depth"])
    radius = int(data["radius"])
    if len(depth) != len(labels):
        raise ValueError("one depth per vertex is required")
    if any(d < 0 or d > radius for d in depth):
        raise ValueError("vertex depths must lie between 0 and the radius")
    index = {label: i for i, label in enumerate(labels)}

    def pair(u, v) -> Tuple[int, int]:
        if str(u) not in index or str(v) not in index:
            raise ValueError(f"edge {u}-{v} names an unknown vertex")
        return normalize_edge(index[str(u)], index[str(v)])

    edges: Dict[Tuple[int, int], int] = {}
    for edge in data.get("edges", []):
        e = pair(edge[0], edge[1])
        edges[e] = edges.get(e, 0) + (int(edge[2]) if len(edge) > 2 else 1)
    walls = frozenset(pair(u, v) for u, v in data.get("walls", []))
    ball = BallGraph(labels, labels, edges, depth, radius, walls)
    if "frontier" in data and sorted(map(str, data["frontier"])) != sorted(ball.side_labels(ball.frontier)):
        raise ValueError("recorded frontier does not match the depths")
    return ball


def graph_from_json(data: Dict[str, Any]) -> BallGraph:
    """
    Read a finite multigraph: vertices, edges as [u, v] or [u, v, multiplicity], optional walls.

    Files carrying a radius and depths are windows saved by ball_to_json and keep them.

    Raises:
        ValueError: If an edge names an unknown vertex
    """
    if "radius" in data and "depth" in data:
        return ball_from_json(data)
    g = nx.MultiGraph()
    names = [str(v) for v in data["vertices"]]
    g.add_nodes_from(names)
    for edge in data.get("edges", []):
        u, v = str(edge[0]), str(edge[1])
        if u not in g or v not in g:
            raise ValueError(f"edge {u}-{v} names an unknown vertex")
        g.add_edge(u, v, multiplicity=int(edge[2]) if len(edge) > 2 else 1)
    walls = [(str(u), str(v)) for u, v in data.get("walls", [])]
    return from_networkx(g, wall_edges=walls)


# cube skeletons

def skeleton_json(skeleton: CubeComplexSkeleton) -> Dict[str, Any]:
    labels = skeleton.pocset.labels
    return {
        "vertices": [skeleton.label(v) for v in range(len(skeleton.vertices))],
        "edges": [[u, v, labels[k]] for u, v, k in skeleton.edges],
        "dimension": skeleton.dimension,
        "window": skeleton.window,
        "is_tree": nx.is_tree(skeleton.graph) if skeleton.vertices else False,
    }


def skeleton_dot(skeleton: CubeComplexSkeleton, name: str = "cubing", vertex_notes: Optional[Dict[int, str]] = None) -> str:
    labels = skeleton.pocset.labels
    notes = vertex_notes or {}
    lines = [f"graph {_quote(name)} {{"]
    for v in range(len(skeleton.vertices)):
        text = skeleton.label(v)
        if v in notes:
            text += f"\\n{notes[v]}"
        lines.append(f"  v{v} [label={_quote(text)}];")
    for u, v, k in skeleton.edges:
        lines.append(f"  v{u} -- v{v} [label={_quote(labels[k])}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit(report: Dict[str, Any], kind: str, as_json: bool = False) -> None:
    """Validate a report and print it: canonical JSON, or its summary lines."""
    validate_report(report, kind)
    if as_json:
        typer.echo(dumps(report), nl=False)
        return
    for line in report.get("summary", []):
        typer.echo(line)
