from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import typer

from export import ball_to_json, dumps, emit, schema_id, window_dot, write_text
from graphs import BallGraph, EndReport, grow_ball, probe_window
from groups import ball_oracle
from runner import run_command
from scenario import Scenario, load_scenario
from splittings import LEFT, RIGHT, SIDE_NAMES, halfspace_profiles, halfspace_window, report_json, resolve_side

ProbedWindow = Tuple[str, BallGraph, bool]


def end_phrase(report: EndReport) -> str:
    """Phrase a whole-group probe as a number of ends."""
    noun = "end" if report.unbounded_count == 1 else "ends"
    state = "stable" if report.stable else "unstable"
    return f"{report.unbounded_count} {noun} ({state})"


def get_end_windows(scenario: Scenario, side: Optional[str], R: int, budget: Optional[int] = None) -> List[ProbedWindow]:
    """
    Grow the windows an ends probe looks at.

    A scenario without a splitting probes the Cayley ball of its target group;
    otherwise the halfspace windows of the base edge are probed, one side or both.

    Returns:
        (name, window, connected) per probed window
    """
    if scenario.splitting is None:
        G = scenario.group()
        return [(G.name, grow_ball(ball_oracle(G), G.identity(), R, budget), True)]
    spec = scenario.splitting
    spec.require_nontrivial()
    sides = [resolve_side(side)] if side else [LEFT, RIGHT]
    windows = []
    for s in sides:
        hs = halfspace_window(spec, s, R, budget=budget)
        windows.append((SIDE_NAMES[s], hs.window, hs.connected))
    return windows


def build_ends_json(scenario: Scenario, windows: List[ProbedWindow], r: int, R: int,
                    profiles: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Build the ends report from probed windows."""
    whole_group = scenario.splitting is None
    entries = {}
    lines = []
    for name, window, connected in windows:
        report = probe_window(window, r)
        entry = report_json(report)
        if whole_group:
            entry["summary"] = end_phrase(report)
        entry["connected"] = connected
        entry["window_size"] = len(window)
        entries[name] = entry
        lines.append(f"{name}: {entry['summary']}")
        if not connected:
            lines.append(f"{name}: window is disconnected at radius {R}")

    result = {
        "schema": schema_id("ends"),
        "scenario": scenario.name,
        "splitting": None if whole_group else scenario.splitting.name,
        "target": "group" if whole_group else "halfspace",
        "inner_radius": r,
        "probe_radius": R,
        "windows": entries,
        "summary": lines,
    }
    if profiles is not None:
        result["profiles"] = profiles
        for side, row in profiles["sides"].items():
            state = "agree" if row["agree"] else "disagree"
            lines.append(f"{side}: the halfspace constructions {state}")
    return result


def compute_ends(path: str, side: Optional[str], inner: Optional[int], probe: Optional[int],
                 budget: Optional[int], compare: bool) -> Tuple[Dict[str, Any], List[ProbedWindow]]:
    scenario = load_scenario(path)
    r = scenario.setting("inner", inner)
    R = scenario.setting("radius", probe)
    budget = scenario.setting("budget", budget)
    if not R > r >= 0:
        raise ValueError("need probe radius > inner radius >= 0")
    windows = get_end_windows(scenario, side, R, budget)
    profiles = None
    if compare and scenario.splitting is not None:
        profiles = halfspace_profiles(scenario.splitting, r, R, budget)
    return build_ends_json(scenario, windows, r, R, profiles), windows


def register(app: typer.Typer) -> None:
    """Register the ends command."""
    @app.command()
    def ends(
        scenario: str = typer.Argument(..., help="Scenario file, or a fixture name such as z"),
        side: Optional[str] = typer.Option(None, "--side", help="Halfspace side: left/right (or A/B)"),
        inner: Optional[int] = typer.Option(None, "-r", "--inner", help="Inner radius r"),
        probe: Optional[int] = typer.Option(None, "-R", "--probe", help="Probe radius R"),
        budget: Optional[int] = typer.Option(None, "--budget", help="Vertex budget"),
        compare: bool = typer.Option(False, "--compare", help="Also probe every halfspace construction"),
        json_out: bool = typer.Option(False, "--json", help="Print the JSON report"),
        dot: Optional[Path] = typer.Option(None, "--dot", help="Write the probed windows as DOT"),
        save: Optional[Path] = typer.Option(None, "--save-windows", help="Write the probed windows as JSON, one entry per window"),
    ) -> None:
        """
        Count the ends of a group, or the unbounded components of its halfspaces.

        Components of B(R) minus B(r) meeting the frontier are counted at R and
        at R - 1; equal counts are reported as stable.
        """
        report, windows = run_command(f"ends {scenario}", compute_ends, scenario, side, inner, probe, budget, compare)
        emit(report, "ends", json_out)
        if dot is not None:
            write_text(dot, "".join(window_dot(w, f"{report['scenario']} {name}") for name, w, _ in windows))
        if save is not None:
            write_text(save, dumps({name: ball_to_json(w) for name, w, _ in windows}))
