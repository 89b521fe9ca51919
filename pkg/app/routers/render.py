# app/routers/render.py
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from app.dependencies.context import cli_errors, get_chart, get_group, parse_vector, run_config
from app.kleinian.cores import HullQuery, SliceState, slice_classify
from app.kleinian.errors import PreconditionError
from app.kleinian.group import sample_limit_set
from app.utils import (
    render_chart,
    render_points,
    render_slice,
    write_json_report,
    write_points_csv,
    write_points_html,
    write_ppm,
    write_table_csv,
)
from config import settings

logger = logging.getLogger(__name__)

router = typer.Typer()


@router.command("limitset")
def limitset(
    config: Path = typer.Option(..., "--config", help="Group file (JSON)"),
    depth: Optional[int] = typer.Option(None, "--depth", help="Word length L of the limit sample"),
    out: Path = typer.Option(Path("."), "--out", help="Output directory"),
    size: int = typer.Option(512, "--size", min=16, help="Image side in pixels"),
    elevation: float = typer.Option(90.0, "--elevation", help="View elevation in degrees"),
    azimuth: float = typer.Option(0.0, "--azimuth", help="View azimuth in degrees"),
    html: Optional[Path] = typer.Option(None, "--html", help="Also write an interactive plotly scatter"),
):
    """Sample the limit set: limitset.csv (x,y,z) and an orthographic limitset.ppm."""
    with cli_errors():
        cfg = run_config(group=config, depth=depth, out=out)
        loaded = get_group(cfg)
        L = cfg.limit_depth(loaded)
        points = sample_limit_set(loaded.spec, L)
        write_points_csv(cfg.out / "limitset.csv", points)
        write_ppm(cfg.out / "limitset.ppm", render_points(points, size, elevation, azimuth))
        if html is not None:
            write_points_html(html, points, title=f"{loaded.spec.name}, L = {L}")
        typer.echo(f"{len(points)} limit points of '{loaded.spec.name}' at depth {L}")


@router.command("components")
def components(
    config: Path = typer.Option(..., "--config", help="Group file (JSON)"),
    res: int = typer.Option(settings.RESOLUTION, "--res", help="Cells per cube-face edge"),
    depth: Optional[int] = typer.Option(None, "--depth", help="Word length L of the limit sample"),
    dilation: Optional[float] = typer.Option(None, "--dilation", help="Angular dilation radius (radians)"),
    out: Path = typer.Option(Path("."), "--out", help="Output directory"),
    width: int = typer.Option(512, "--width", min=16, help="Image width in pixels"),
):
    """Label the components of the domain of discontinuity on the cube-sphere raster."""
    with cli_errors():
        cfg = run_config(group=config, resolution=res, depth=depth, dilation=dilation, out=out)
        loaded = get_group(cfg)
        L = cfg.limit_depth(loaded)
        samples, chart = get_chart(cfg, loaded.spec, L)
        table = chart.table()
        write_json_report(
            cfg.out / "components.json",
            {
                "group": loaded.spec.name,
                "resolution": cfg.resolution,
                "depth": L,
                "dilation": chart.dilation,
                "limit_points": len(samples),
                "marked_area": chart.marked_area,
                "count": chart.count,
                "components": table,
            },
        )
        write_ppm(cfg.out / "components.ppm", render_chart(chart, width))
        typer.echo(f"components: {chart.count}")
        for row in table:
            typer.echo(f"  {row['label']}: area {row['area']:.4f}, jordan {row['jordan']}")


@router.command("slice")
def slice_(
    config: Path = typer.Option(..., "--config", help="Group file (JSON)"),
    base: str = typer.Option("0,0,0", "--base", help="Plane basepoint x,y,z"),
    e1: str = typer.Option("1,0,0", "--e1", help="First in-plane unit direction"),
    e2: str = typer.Option("0,1,0", "--e2", help="Second in-plane unit direction"),
    window: float = typer.Option(1.0, "--window", help="Half-width of the plane window"),
    pixels: int = typer.Option(64, "--pixels", min=1, help="Pixels per side"),
    res: int = typer.Option(settings.RESOLUTION, "--res", help="Cells per cube-face edge"),
    depth: Optional[int] = typer.Option(None, "--depth", help="Word length L of the limit sample"),
    dilation: Optional[float] = typer.Option(None, "--dilation", help="Angular dilation radius (radians)"),
    tau: float = typer.Option(settings.TAU, "--tau", help="Hull margin"),
    out: Path = typer.Option(Path("."), "--out", help="Output directory"),
):
    """Classify a planar slice of the ball: in both hulls, convex hull only, outside, or uncertain."""
    with cli_errors():
        cfg = run_config(group=config, resolution=res, depth=depth, dilation=dilation, tau=tau, out=out)
        b, u, v = parse_vector(base, "base"), parse_vector(e1, "e1"), parse_vector(e2, "e2")
        gram = np.array([[u @ u, u @ v], [v @ u, v @ v]])
        if not np.allclose(gram, np.eye(2), atol=1e-9):
            raise PreconditionError("e1 and e2 must be orthonormal")
        offset = b - (b @ u) * u - (b @ v) * v
        if np.linalg.norm(offset) >= 1.0:
            raise PreconditionError("the slice plane misses the open ball")

        loaded = get_group(cfg)
        samples, chart = get_chart(cfg, loaded.spec, cfg.limit_depth(loaded))
        result = slice_classify(b, u, v, window, pixels, HullQuery(chart, "all", cfg.tau), samples)
        write_ppm(cfg.out / "slice.ppm", render_slice(result.states))
        write_table_csv(cfg.out / "slice.csv", result.records())
        typer.echo(", ".join(f"{state.value}: {result.count(state)}" for state in SliceState))
