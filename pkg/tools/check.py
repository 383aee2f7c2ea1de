from typing import Any, Dict, Optional

import typer

from export import emit, schema_id
from runner import run_command
from scenario import Scenario, load_scenario
from splittings import syntactic_checks


def build_check_json(scenario: Scenario, r: int, R: int, budget: Optional[int] = None) -> Dict[str, Any]:
    """Run the pattern checks on a scenario's declared splitting."""
    spec = scenario.declared or scenario.require_splitting()
    report = syntactic_checks(spec, r, R, budget)
    report["schema"] = schema_id("check")
    report["scenario"] = scenario.name
    report["hypotheses"] = sorted(spec.hypotheses)
    return report


def compute_check(path: str, inner: Optional[int], probe: Optional[int], budget: Optional[int]) -> Dict[str, Any]:
    scenario = load_scenario(path)
    return build_check_json(
        scenario,
        scenario.setting("inner", inner),
        scenario.setting("radius", probe),
        scenario.setting("budget", budget),
    )


def register(app: typer.Typer) -> None:
    """Register the check command."""
    @app.command()
    def check(
        scenario: str = typer.Argument(..., help="Scenario file, or a fixture name such as example83"),
        inner: Optional[int] = typer.Option(None, "-r", "--inner", help="Inner radius r"),
        probe: Optional[int] = typer.Option(None, "-R", "--probe", help="Probe radius R"),
        budget: Optional[int] = typer.Option(None, "--budget", help="Vertex budget"),
        json_out: bool = typer.Option(False, "--json", help="Print the JSON report"),
    ) -> None:
        """
        Match a splitting against the commuting-stable-letter and double patterns.

        Conclusions are quoted with their citation and the basis (probed or
        declared) of the one-endedness they rely on.
        """
        report = run_command(f"check {scenario}", compute_check, scenario, inner, probe, budget)
        emit(report, "check", json_out)
