# app/routers/measure.py
import logging
from enum import Enum
from pathlib import Path
from typing import List, Optional

import numpy as np
import typer

from app.dependencies.context import cli_errors, get_chart, get_group, parse_vector, run_config
from app.kleinian.errors import PreconditionError
from app.kleinian.harmonic import HarmonicEstimate, measure_kernel, measure_rays
from app.kleinian.moebius import BallPoint
from app.kleinian.sphere import build_raster
from app.utils import write_json_report
from config import settings

logger = logging.getLogger(__name__)

router = typer.Typer()


class Method(str, Enum):
    kernel = "kernel"
    rays = "rays"
    both = "both"


def region_selector(component: str, config: Optional[Path], res: int, depth: Optional[int], dilation):
    """Raster cells and a point-membership test for the selected region.

    `sphere` and `upper` need no group; an integer selects a component label.
    """
    if component == "sphere":
        raster = build_raster(res)
        return raster, np.ones(raster.size, dtype=bool), lambda pts: np.ones(len(pts), dtype=bool)
    if component == "upper":
        raster = build_raster(res)
        return raster, raster.centers[:, 2] > 0, lambda pts: pts[:, 2] > 0
    try:
        label = int(component)
    except ValueError:
        raise PreconditionError(f"component must be 'sphere', 'upper' or a label, got '{component}'")

    cfg = run_config(group=config, resolution=res, depth=depth, dilation=dilation)
    loaded = get_group(cfg)
    _, chart = get_chart(cfg, loaded.spec, cfg.limit_depth(loaded))
    chart.component(label)
    return chart.raster, chart.labels == label, lambda pts: chart.label_of(pts) == label


@router.command("hmeasure")
def hmeasure(
    point: str = typer.Option("0,0,0", "--point", help="Ball point x,y,z with |y| < 1"),
    component: str = typer.Option("sphere", "--component", help="sphere, upper, or a component label"),
    config: Optional[Path] = typer.Option(None, "--config", help="Group file, needed for component labels"),
    method: Method = typer.Option(Method.kernel, "--method", help="Estimator"),
    samples: int = typer.Option(settings.RAY_SAMPLES, "--samples", help="Ray count"),
    seed: Optional[int] = typer.Option(settings.SEED, "--seed", help="Seed for the ray estimator"),
    res: int = typer.Option(settings.RESOLUTION, "--res", help="Cells per cube-face edge"),
    depth: Optional[int] = typer.Option(None, "--depth", help="Word length L of the limit sample"),
    dilation: Optional[float] = typer.Option(None, "--dilation", help="Angular dilation radius (radians)"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the estimates as JSON to this directory"),
):
    """Visual measure of a sphere region seen from a point of the ball."""
    with cli_errors():
        cfg = run_config(resolution=res, samples=samples, seed=seed)
        y = BallPoint.from_vector(parse_vector(point))
        raster, cells, member = region_selector(component, config, cfg.resolution, depth, dilation)

        estimates: List[HarmonicEstimate] = []
        if method in (Method.kernel, Method.both):
            estimates.append(measure_kernel(y, cells, raster))
        if method in (Method.rays, Method.both):
            estimates.append(measure_rays(y, member, cfg.samples, cfg.require_seed()))

        for est in estimates:
            typer.echo(f"{est.method}: {est.value:.6f} ± {est.error:.2g}")
        if len(estimates) == 2:
            kernel, rays = estimates
            typer.echo(f"difference: {abs(kernel.value - rays.value):.6f} (allowed {kernel.error + rays.error:.2g})")
        if out is not None:
            write_json_report(
                out / "hmeasure.json",
                {"point": y.array, "component": component, "estimates": estimates},
            )
