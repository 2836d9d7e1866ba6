# scripts/benchmark.py
"""
Débit CPU : ellipsoïde 3D, une sphère par point, 40 itérations, plusieurs
nombres de threads. Vérifie au passage que les sorties sont identiques bit à
bit quel que soit le nombre de threads.

    python scripts/benchmark.py --n 10000 --threads 1,8
"""
from __future__ import annotations

import logging
from typing import Dict

import numpy as np
import pendulum as p
import typer
from rich.table import Table

from medialfit.core.models import MedialResult
from medialfit.core.shapes import ellipsoid
from medialfit.core.shrink import shrink_all
from medialfit.core.solver import default_params, solve_all
from medialfit.log import setup_logging
from medialfit.theme import print

app = typer.Typer(add_completion=False, help="Débit LSMAT / sphere shrinking sur un ellipsoïde 3D.")


def _stack(result: MedialResult) -> np.ndarray:
    return np.column_stack([result.centers(), result.radii()])


@app.command()
def main(
    n: int = typer.Option(10_000, "--n", help="Points (et sphères)."),
    iters: int = typer.Option(40, "--iters"),
    threads: str = typer.Option("1,8", "--threads", help="Liste de nombres de threads."),
    skip_shrink: bool = typer.Option(False, "--skip-shrink"),
):
    setup_logging(logging.WARNING)
    cloud = ellipsoid(n).cloud
    cfg = default_params(0.0, max_iters=iters)
    counts = [int(t) for t in threads.split(",") if t.strip()]

    table = Table(title=f"Débit — ellipsoïde, {n} points", show_header=True, header_style="accent")
    table.add_column("Méthode")
    table.add_column("Threads", justify="right")
    table.add_column("Secondes", justify="right")
    table.add_column("Sphères/s", justify="right")

    reference: Dict[str, np.ndarray] = {}
    identical = True
    methods = [("lsmat", lambda j: solve_all(cloud, cfg, threads=j))]
    if not skip_shrink:
        methods.append(("shrink", lambda j: shrink_all(cloud, threads=j)))

    for name, run in methods:
        for j in counts:
            t0 = p.now()
            result = run(j)
            secs = (p.now() - t0).total_seconds()
            table.add_row(name, str(j), f"{secs:.2f}", f"{len(result.atoms) / max(secs, 1e-9):.0f}")
            out = _stack(result)
            if name in reference:
                identical &= bool(np.array_equal(reference[name], out))
            else:
                reference[name] = out

    print(table)
    if identical:
        print("[ok]Sorties identiques quel que soit le nombre de threads ✔[/]")
    else:
        print("[err]Sorties différentes selon le nombre de threads ✘[/]")
        raise typer.Exit(code=1)


if __name__ == "__main__":
    app()
