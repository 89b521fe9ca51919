import logging

import typer

from app.routers import measure, render, verify
from config import settings

logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)

app = typer.Typer(
    name="kleinvis",
    help="Visual hulls, convex hulls and embedding checks for Kleinian groups",
    no_args_is_help=True,
    add_completion=False,
)


def include_router(target: typer.Typer, router: typer.Typer) -> None:
    """Mount a router's commands at the top level."""
    target.registered_commands.extend(router.registered_commands)


include_router(app, render.router)
include_router(app, measure.router)
include_router(app, verify.router)


@app.callback()
def main(
    log_level: str = typer.Option(settings.LOG_LEVEL, "--log-level", help="Logging level"),
):
    logging.getLogger().setLevel(log_level.upper())


if __name__ == "__main__":
    app()
