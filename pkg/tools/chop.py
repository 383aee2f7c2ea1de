from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import typer

from chopping import ChopReport, ChopRound, iterate_chop
from config import get_settings
from export import emit, schema_id, skeleton_dot, window_dot, write_text
from runner import run_command
from scenario import load_scenario
from splittings import SplittingSpec, report_json, tree_window


def round_json(rnd: ChopRound) -> Dict[str, Any]:
    """Flatten one chop round into plain JSON values."""
    base, order, tree = rnd.base, rnd.order, rnd.tree
    return {
        "index": rnd.index,
        "splitting": rnd.splitting,
        "side": rnd.side,
        "probes": {side: report_json(r) for side, r in sorted(rnd.probes.items())},
        "cut": {
            "boundary_size": rnd.cut.cut.boundary_size,
            "wall_weight": rnd.cut.wall_weight,
            "side_size": len(rnd.cut.cut.side),
            "anomalies": list(rnd.cut.anomalies),
        },
        "t0": {
            "translates": len(base.translates),
            "vertices": len(base.tree.vertices),
            "edges": len(base.tree.edges),
            "orbit_count": base.orbit_count,
            "witness": list(base.witness) if base.witness is not None else None,
            "stable": base.stable,
            "edge_stabilizers": {k: list(v) for k, v in sorted(base.edge_stabilizers.items())},
        },
        "classes": {"count": len(base.class_map.classes), "deep": len(base.class_map.deep)},
        "p": {
            "elements": len(order.elements),
            "transverse_pairs": len(order.pocset.transverse_pairs()),
            "anomalies": list(order.anomalies),
        },
        "t_prime": {
            "vertices": len(tree.skeleton.vertices),
            "edges": len(tree.skeleton.edges),
            "tau_injective": tree.tau_injective,
            "phi_consistent": tree.phi_consistent,
            "hyperbolic": tree.hyperbolic,
        },
        "stabilizers": {str(k): list(v) for k, v in sorted(rnd.stabilizers.items())},
        "properties": dict(rnd.properties),
        "next_splitting": rnd.next_splitting,
        "note": rnd.note,
        "rejected": list(rnd.rejected),
    }


def build_chop_json(scenario_name: str, report: ChopReport) -> Dict[str, Any]:
    """Build the chop report: every round, the final probes and the summary lines."""
    return {
        "schema": schema_id("chop"),
        "scenario": scenario_name,
        "splitting": report.splitting,
        "inner_radius": report.inner_radius,
        "probe_radius": report.probe_radius,
        "rounds": [round_json(rnd) for rnd in report.rounds],
        "terminated": report.terminated,
        "final_splitting": report.final_splitting,
        "final_probes": {side: report_json(r) for side, r in sorted(report.final_probes.items())},
        "notes": list(report.notes),
        "summary": report.summary(),
    }


def chop_dot(spec: SplittingSpec, report: ChopReport, budget: Optional[int] = None) -> str:
    """T' of the last round, or the tree window of the input when nothing was chopped."""
    if report.rounds:
        tree = report.rounds[-1].tree
        notes = {v: where for v, where in enumerate(tree.phi_vertices) if where}
        return skeleton_dot(tree.skeleton, f"T' {report.final_splitting}", notes)
    return window_dot(tree_window(spec, get_settings().tree_radius + 1, budget=budget), f"T {spec.name}")


def compute_chop(path: str, rounds: Optional[int], inner: Optional[int], probe: Optional[int],
                 budget: Optional[int], want_dot: bool) -> Tuple[Dict[str, Any], Optional[str]]:
    scenario = load_scenario(path)
    spec = scenario.require_splitting()
    budget = scenario.setting("budget", budget)
    report = iterate_chop(
        spec,
        scenario.setting("rounds", rounds),
        scenario.setting("inner", inner),
        scenario.setting("radius", probe),
        budget,
    )
    dot = chop_dot(spec, report, budget) if want_dot else None
    return build_chop_json(scenario.name, report), dot


def register(app: typer.Typer) -> None:
    """Register the chop command."""
    @app.command()
    def chop(
        scenario: str = typer.Argument(..., help="Scenario file, or a fixture name such as example71"),
        rounds: Optional[int] = typer.Option(None, "--rounds", help="Maximum number of chop rounds"),
        inner: Optional[int] = typer.Option(None, "-r", "--inner", help="Inner radius r"),
        probe: Optional[int] = typer.Option(None, "-R", "--probe", help="Probe radius R"),
        budget: Optional[int] = typer.Option(None, "--budget", help="Vertex budget"),
        json_out: bool = typer.Option(False, "--json", help="Print the JSON report"),
        dot: Optional[Path] = typer.Option(None, "--dot", help="Write the final tree window as DOT"),
    ) -> None:
        """
        Chop a splitting with a multi-ended halfspace into one with smaller edge stabilizers.

        Each round cuts the multi-ended halfspace window, builds the translate
        tree and the refined pocset, and cubes it to the new tree.
        """
        report, text = run_command(f"chop {scenario}", compute_chop, scenario, rounds, inner, probe, budget, dot is not None)
        emit(report, "chop", json_out)
        if dot is not None:
            write_text(dot, text)
