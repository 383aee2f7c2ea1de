import typer
from mcp.server.fastmcp.utilities.logging import configure_logging

from config import get_settings
from tools.check import register as register_check
from tools.chop import register as register_chop
from tools.cube import register as register_cube
from tools.ends import register as register_ends
from tools.mincut import register as register_mincut

app = typer.Typer(
    name="splitkit",
    help="Splittings, halfspaces, cubings and chops at finite scale.",
    no_args_is_help=True,
    add_completion=False,
)


@app.callback()
def main_callback(
    verbose: bool = typer.Option(False, "-v", "--verbose", help="Log progress at INFO level"),
) -> None:
    level = "INFO" if verbose else get_settings().log_level.upper()
    configure_logging(level)


register_ends(app)
register_chop(app)
register_cube(app)
register_mincut(app)
register_check(app)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
