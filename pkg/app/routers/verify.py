# app/routers/verify.py
import logging
from enum import Enum
from pathlib import Path
from typing import List, Optional

import typer

from app.dependencies.context import builtin_group, chart_source, cli_errors, get_group, run_config
from app.fixtures.fixtures import SHIPPED
from app.kleinian.combination import (
    FAIL,
    INCONCLUSIVE,
    SuiteOutcome,
    suite_combination,
    suite_cores,
    suite_embedding,
    suite_emptiness,
)
from app.utils import write_json_report
from config import settings

logger = logging.getLogger(__name__)

router = typer.Typer()

EXIT_VIOLATION = 1
EXIT_INCONCLUSIVE = 3


class Suite(str, Enum):
    cores = "cores"
    emptiness = "emptiness"
    embedding = "embedding"
    combination = "combination"
    all = "all"


@router.command("verify")
def verify(
    suite: Suite = typer.Argument(..., help="Check suite to run"),
    config: Optional[Path] = typer.Option(None, "--config", help="Group file; defaults to the shipped fixtures"),
    res: int = typer.Option(settings.RESOLUTION, "--res", help="Cells per cube-face edge"),
    depth: Optional[int] = typer.Option(None, "--depth", help="Word length of the limit samples"),
    embed_depth: int = typer.Option(settings.DEPTH, "--embed-depth", min=0, help="Word length L for coset representatives"),
    samples: int = typer.Option(200, "--samples", help="Points per sampled check"),
    seed: Optional[int] = typer.Option(settings.SEED, "--seed", help="Seed for every sampled check"),
    tau: float = typer.Option(settings.TAU, "--tau", help="Hull margin"),
    out: Path = typer.Option(Path("."), "--out", help="Directory for verify.json"),
):
    """Run the verification suites. Exit 0 on success, 1 on a violation, 3 when inconclusive."""
    with cli_errors():
        cfg = run_config(group=config, resolution=res, depth=depth, tau=tau, samples=samples, seed=seed, out=out)
        seed = cfg.require_seed()
        groups = [get_group(cfg)] if config is not None else [builtin_group(name) for name in SHIPPED]
        selected = [s for s in Suite if s is not Suite.all] if suite is Suite.all else [suite]

        outcomes: List[SuiteOutcome] = []
        for loaded in groups:
            G = loaded.spec
            chart_for = chart_source(cfg, loaded)
            for s in selected:
                if s is Suite.cores:
                    outcome = suite_cores(G, chart_for, cfg.samples, seed, cfg.tau)
                elif s is Suite.emptiness:
                    outcome = suite_emptiness(G, chart_for, cfg.samples, seed)
                elif s is Suite.embedding:
                    outcome = suite_embedding(G, chart_for, embed_depth, cfg.samples, seed, cfg.tau)
                else:
                    outcome = suite_combination(G, chart_for, cfg.resolution)
                logger.info(f"{s.value} on '{G.name}': {outcome.status}")
                typer.echo(f"{s.value:12s} {G.name:20s} {outcome.status}")
                outcomes.append(outcome)

        write_json_report(
            cfg.out / "verify.json",
            {"suite": suite.value, "seed": seed, "resolution": cfg.resolution, "outcomes": outcomes},
        )

    statuses = [o.status for o in outcomes]
    if FAIL in statuses:
        raise typer.Exit(code=EXIT_VIOLATION)
    if INCONCLUSIVE in statuses:
        raise typer.Exit(code=EXIT_INCONCLUSIVE)
