# medialfit/cli.py
from __future__ import annotations

import logging
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError
from rich.table import Table

from . import config
from .theme import print, fmt_pct, fmt_bool
from .log import setup_logging
from .core.errors import BadInput, DimensionMismatch, MedialError
from .core.evaluation import load_polygon
from .core.models import NoiseSpec
from .features.evaluate import evaluate_table, evaluate_trace
from .features.generate import generate_dataset
from .features.render import render_svg, write_ply
from .features.replay import replay_manifest
from .features.runs import RunRecorder
from .features.solve import build_config, load_input, run_method
from .features.sweep import parse_sigma_list, run_sweep, write_sweep_csv
from .storage import db
from .storage.files import read_spheres, read_trace, write_eval_json, write_spheres, write_trace
from .utils.dates import iso_local
from .utils.envtools import write_env_example, check_env

app = typer.Typer(help="medialfit — axe médian de nuages orientés par moindres carrés.")

EXIT_BAD_INPUT, EXIT_SOLVER, EXIT_IO = 2, 3, 4


class Method(str, Enum):
    lsmat = "lsmat"
    shrink = "shrink"
    lsmat_irls = "lsmat-irls"


# ──────────────────────────────────────────────────────────────────────────────
# Init / logging
# ──────────────────────────────────────────────────────────────────────────────
@app.callback()
def _init(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Logs détaillés.")
):
    setup_logging(logging.DEBUG if verbose else config.LOG_LEVEL)


@contextmanager
def _exit_codes():
    """Erreurs métier → code de sortie : 2 entrée, 3 solveur, 4 E/S."""
    try:
        yield
    except (BadInput, ValidationError, ValueError) as e:
        print(f"[err]Entrée invalide :[/] {e}")
        raise typer.Exit(code=EXIT_BAD_INPUT)
    except MedialError as e:
        print(f"[err]Échec du solveur :[/] {e}")
        raise typer.Exit(code=EXIT_SOLVER)
    except OSError as e:
        print(f"[err]Erreur d'E/S :[/] {e}")
        raise typer.Exit(code=EXIT_IO)


def _argv(ctx: typer.Context) -> List[str]:
    """Reconstruit une ligne de commande canonique à partir des paramètres résolus."""
    out = [ctx.info_name]
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if value is None:
            continue
        if param.param_type_name == "argument":
            out.append(_arg_str(value))
            continue
        if getattr(param, "is_flag", False) and isinstance(value, bool):
            if value:
                out.append(param.opts[0])
            elif param.secondary_opts:
                out.append(param.secondary_opts[0])
            continue
        values = value if isinstance(value, (list, tuple)) else [value]
        for v in values:
            out += [param.opts[0], _arg_str(v)]
    return out


def _arg_str(v) -> str:
    if isinstance(v, Enum):
        return str(v.value)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_params(items: Optional[List[str]]) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--param attend clé=valeur, reçu {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    return params


# ──────────────────────────────────────────────────────────────────────────────
# ENV
# ──────────────────────────────────────────────────────────────────────────────
@app.command("env-example")
def env_example(
    force: bool = typer.Option(
        False, "--force", "-f", help="Écrase .env.example s’il existe déjà."
    )
):
    """Génère un fichier .env.example à la racine du projet."""
    path = write_env_example(overwrite=force)
    print(
        f"[ok]Fichier d’exemple généré : [bold]{path}[/] "
        "(duplique-le en .env si tu veux changer les défauts)."
    )


@app.command("env-check")
def env_check():
    """Vérifie que les variables MEDIALFIT_* présentes se parsent."""
    status, errors = check_env()

    table = Table(title="Vérification de l'environnement", show_header=True, header_style="accent")
    table.add_column("Clé")
    table.add_column("OK ?")
    for k, ok in status.items():
        table.add_row(k, fmt_bool(ok))
    print(table)

    if errors:
        print("[err]Variables invalides :[/]")
        for k, why in errors.items():
            print(f" • [bold]{k}[/] — {why}")
        raise typer.Exit(code=EXIT_BAD_INPUT)
    print("[ok]Environnement prêt ✔[/]")


# ──────────────────────────────────────────────────────────────────────────────
# Génération de jeux de données
# ──────────────────────────────────────────────────────────────────────────────
@app.command("generate")
def cmd_generate(
    ctx: typer.Context,
    shape: str = typer.Argument(..., help="circle, ellipse, rectangle, star, annulus, notched_box, sphere, ellipsoid"),
    n: int = typer.Option(512, "--n", help="Nombre d'échantillons."),
    sigma: float = typer.Option(0.0, "--sigma", help="Bruit σ_p en % de la diagonale."),
    mode: str = typer.Option("isotropic", "--mode", help="isotropic | along_normal"),
    outliers: float = typer.Option(0.0, "--outliers", help="Fraction d'outliers dans [0, 1)."),
    seed: int = typer.Option(config.SEED, "--seed"),
    param: Optional[List[str]] = typer.Option(None, "--param", "-p", help="Paramètre de forme clé=valeur."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Fichier nuage (défaut : <OUT_DIR>/<shape>.pts)."),
):
    """Écrit un nuage orienté et, en 2D, le polygone de vérité terrain (.poly)."""
    with _exit_codes():
        out = out or Path(config.OUT_DIR) / f"{shape}.pts"
        noise = NoiseSpec(sigma_p=sigma, mode=mode, outlier_fraction=outliers, seed=seed)
        params = _parse_params(param)
        rec = RunRecorder("generate", _argv(ctx), {"shape": shape, "n": n, "params": params, "noise": noise.model_dump()})
        with rec.phase("generate"):
            ds = generate_dataset(shape, n, noise, out, params)
        rec.add_output(ds.cloud_path)
        if ds.polygon_path is not None:
            rec.add_output(ds.polygon_path)
        rec.finish(ds.cloud_path)

    print(f"[ok]Nuage écrit[/] — [bold]{ds.cloud_path}[/] ({len(ds.cloud)} points, dim {ds.cloud.dim})")
    if ds.polygon_path is not None:
        print(f"• Polygone de vérité terrain : [bold]{ds.polygon_path}[/]")


# ──────────────────────────────────────────────────────────────────────────────
# Résolution
# ──────────────────────────────────────────────────────────────────────────────
@app.command("solve")
def cmd_solve(
    ctx: typer.Context,
    input: Path = typer.Argument(..., help="Nuage orienté (x y [z] nx ny [nz]) ou maillage 3D."),
    method: Method = typer.Option(Method.lsmat, "--method", "-m"),
    dim: int = typer.Option(2, "--dim", help="Dimension du nuage texte (2 ou 3)."),
    sigma: float = typer.Option(0.0, "--sigma", help="Niveau de bruit supposé : fixe les défauts."),
    omega_ratio: Optional[float] = typer.Option(None, "--omega-ratio", help="ω₁/ω₂."),
    omega2: Optional[float] = typer.Option(None, "--omega2"),
    h_blend: Optional[float] = typer.Option(None, "--h-blend", help="% diag."),
    h_support: Optional[float] = typer.Option(None, "--h-support", help="% diag."),
    d_pin: Optional[float] = typer.Option(None, "--d-pin", help="% diag."),
    epsilon: Optional[float] = typer.Option(None, "--epsilon", help="% diag."),
    pin_weight: Optional[float] = typer.Option(None, "--pin-weight"),
    pinning: Optional[bool] = typer.Option(None, "--pinning/--no-pinning"),
    max_iters: Optional[int] = typer.Option(None, "--max-iters"),
    step_damping: Optional[float] = typer.Option(None, "--step-damping"),
    radius_floor: Optional[float] = typer.Option(None, "--radius-floor", help="Unités monde."),
    inscription: Optional[str] = typer.Option(None, "--inscription", help="blended | point_only | plane_only"),
    maximality: Optional[str] = typer.Option(None, "--maximality", help="constant_pressure | inverse_radius | target_radius"),
    r_max: Optional[float] = typer.Option(None, "--r-max", help="% diag (target_radius)."),
    irls_delta: Optional[float] = typer.Option(None, "--irls-delta", help="% diag."),
    init: Optional[str] = typer.Option(None, "--init", help="random | surface"),
    seed: int = typer.Option(config.SEED, "--seed"),
    mesh_samples: int = typer.Option(10_000, "--mesh-samples", help="Points tirés sur un maillage."),
    trace_every: int = typer.Option(0, "--trace-every", help="Garde l'état toutes les k itérations (0 : non)."),
    threads: int = typer.Option(config.THREADS, "--threads", "-j"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV de sphères."),
):
    """Une sphère médiane par point : LSMAT, LSMAT-IRLS ou sphere shrinking."""
    with _exit_codes():
        m = method.value
        out = out or Path(config.OUT_DIR) / f"{input.stem}.{m}.csv"
        cfg = None
        if m != "shrink":
            cfg = build_config(
                m, sigma,
                omega_ratio=omega_ratio, omega2=omega2, h_blend=h_blend, h_support=h_support,
                d_pin=d_pin, epsilon=epsilon, pin_weight=pin_weight, pinning=pinning,
                max_iters=max_iters, step_damping=step_damping, radius_floor=radius_floor,
                inscription_variant=inscription, maximality_variant=maximality, r_max=r_max,
                irls_delta=irls_delta, init=init, seed=seed,
            )
        rec = RunRecorder("solve", _argv(ctx), {"method": m, "solver": cfg.model_dump() if cfg else None})
        with rec.phase("load"):
            cloud = load_input(input, dim, mesh_samples, seed)
        rec.add_input(input)
        with rec.phase("solve"):
            result = run_method(cloud, m, cfg, threads=threads, trace_every=trace_every)
        rec.iterations["solve"] = int(sum(a.iterations_run for a in result.atoms))

        if result.atoms and result.failures == len(result.atoms):
            raise MedialError(f"les {len(result.atoms)} sphères ont échoué")

        write_spheres(result, out)
        rec.add_output(out)
        if trace_every and result.trace:
            trace_path = write_trace(result, out.with_name(out.stem + ".trace.csv"))
            rec.add_output(trace_path)
        rec.finish(out)

    table = Table(show_header=True, header_style="accent")
    table.add_column("Méthode")
    table.add_column("Sphères", justify="right")
    table.add_column("Convergées", justify="right")
    table.add_column("Échecs", justify="right")
    table.add_row(result.method, str(len(result.atoms)),
                  f"{100.0 * result.converged_fraction:.1f}%", str(result.failures))
    print(table)
    print(f"[ok]Sphères écrites[/] — [bold]{out}[/]")


# ──────────────────────────────────────────────────────────────────────────────
# Évaluation
# ──────────────────────────────────────────────────────────────────────────────
@app.command("eval")
def cmd_eval(
    ctx: typer.Context,
    spheres: Optional[Path] = typer.Argument(None, help="CSV de sphères (2D)."),
    polygon: Optional[Path] = typer.Argument(None, help="Polygone de vérité terrain (.poly)."),
    resolution: int = typer.Option(config.RESOLUTION, "--resolution", "-r"),
    json_out: Optional[Path] = typer.Option(None, "--json", help="Rapport JSON (défaut : <spheres>.eval.json)."),
    trace: Optional[Path] = typer.Option(None, "--trace", help="CSV de trace : une évaluation par itération."),
    sigma_list: Optional[str] = typer.Option(None, "--sigma-list", help="Mode balayage, ex. 0,0.5,1,2."),
    shape: str = typer.Option("star", "--shape", help="Forme du balayage."),
    n: int = typer.Option(512, "--n", help="Échantillons du balayage."),
    seeds: int = typer.Option(1, "--seeds", help="Tirages moyennés par σ (balayage)."),
    threads: int = typer.Option(config.THREADS, "--threads", "-j"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV du balayage."),
):
    """E_avg / E_max (% de la diagonale) contre l'axe médian pixelisé."""
    if sigma_list is not None:
        _sweep(ctx, shape, sigma_list, n, seeds, 0.0, "lsmat,shrink", resolution, threads, out)
        return

    with _exit_codes():
        if spheres is None or polygon is None:
            raise BadInput("eval attend SPHERES et POLYGON (ou --sigma-list)")
        json_out = json_out or spheres.with_name(spheres.stem + ".eval.json")
        rec = RunRecorder("eval", _argv(ctx), {"resolution": resolution})
        table = read_spheres(spheres)
        if table.dim != 2:
            raise DimensionMismatch(f"évaluation 2D uniquement (CSV en dim={table.dim})")
        loops = load_polygon(polygon)
        rec.add_input(spheres)
        rec.add_input(polygon)
        with rec.phase("eval"):
            report = evaluate_table(table, loops, resolution, threads)
        write_eval_json(report, json_out)
        rec.add_output(json_out)

        curve = []
        if trace is not None:
            rec.add_input(trace)
            with rec.phase("trace"):
                curve = evaluate_trace(read_trace(trace), loops, resolution, threads)
            rec.iterations["trace"] = len(curve)
        rec.finish(json_out)

    print(f"[title]Évaluation[/] — {table.method or 'sphères'} ({report.n_atoms} atomes, {resolution}²)")
    print(f"• E_avg : {fmt_pct(report.e_avg)}")
    print(f"• E_max : {fmt_pct(report.e_max)}")
    if curve:
        t = Table(title="Convergence", show_header=True, header_style="accent")
        t.add_column("Itération", justify="right")
        t.add_column("E_avg", justify="right")
        t.add_column("E_max", justify="right")
        for it, rep in curve:
            t.add_row(str(it), fmt_pct(rep.e_avg), fmt_pct(rep.e_max))
        print(t)
    print(f"[muted]JSON : {json_out}[/]")


# ──────────────────────────────────────────────────────────────────────────────
# Balayage en bruit
# ──────────────────────────────────────────────────────────────────────────────
def _sweep(ctx, shape, sigma_list, n, seeds, outliers, methods, resolution, threads, out):
    with _exit_codes():
        sigmas = parse_sigma_list(sigma_list)
        method_list = [m.strip() for m in methods.split(",") if m.strip()]
        out = out or Path(config.OUT_DIR) / f"sweep_{shape}.csv"
        rec = RunRecorder(ctx.info_name, _argv(ctx), {
            "shape": shape, "sigmas": sigmas, "n": n, "seeds": seeds,
            "outliers": outliers, "methods": method_list, "resolution": resolution,
        })
        with rec.phase("sweep"):
            rows = run_sweep(shape, sigmas, n=n, methods=method_list, seeds=range(seeds),
                             outlier_fraction=outliers, resolution=resolution, threads=threads)
        write_sweep_csv(rows, out)
        rec.add_output(out)
        rec.finish(out)

    table = Table(title=f"Balayage — {shape}", show_header=True, header_style="accent")
    table.add_column("σ_p", justify="right")
    table.add_column("Méthode")
    table.add_column("E_avg", justify="right")
    table.add_column("E_max", justify="right")
    for r in rows:
        table.add_row(f"{r.sigma:g}", r.method, fmt_pct(r.e_avg_pct), fmt_pct(r.e_max_pct))
    print(table)
    print(f"[ok]Courbe écrite[/] — [bold]{out}[/]")


@app.command("sweep")
def cmd_sweep(
    ctx: typer.Context,
    shape: str = typer.Argument("star"),
    sigma_list: str = typer.Option("0,0.5,1,2", "--sigma-list"),
    n: int = typer.Option(512, "--n"),
    seeds: int = typer.Option(1, "--seeds", help="Tirages moyennés par σ."),
    outliers: float = typer.Option(0.0, "--outliers"),
    methods: str = typer.Option("lsmat,shrink", "--methods", help="Liste parmi lsmat, lsmat-irls, shrink."),
    resolution: int = typer.Option(config.RESOLUTION, "--resolution", "-r"),
    threads: int = typer.Option(config.THREADS, "--threads", "-j"),
    out: Optional[Path] = typer.Option(None, "--out", "-o"),
):
    """Courbe sigma,method,e_avg_pct,e_max_pct pour une forme intégrée."""
    _sweep(ctx, shape, sigma_list, n, seeds, outliers, methods, resolution, threads, out)


# ──────────────────────────────────────────────────────────────────────────────
# Rendu
# ──────────────────────────────────────────────────────────────────────────────
@app.command("render")
def cmd_render(
    ctx: typer.Context,
    cloud_path: Path = typer.Argument(..., help="Nuage orienté."),
    spheres: Path = typer.Argument(..., help="CSV de sphères."),
    dim: int = typer.Option(2, "--dim"),
    size: int = typer.Option(800, "--size", help="Côté de la figure SVG (px)."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="SVG (2D) ou PLY (3D)."),
):
    """2D : SVG en calques. 3D : PLY ASCII avec un rayon par centre."""
    with _exit_codes():
        cloud = load_input(cloud_path, dim)
        table = read_spheres(spheres)
        if table.dim != cloud.dim:
            raise DimensionMismatch(f"sphères dim={table.dim}, nuage dim={cloud.dim}")
        out = out or spheres.with_suffix(".svg" if cloud.dim == 2 else ".ply")
        rec = RunRecorder("render", _argv(ctx), {"size": size})
        rec.add_input(cloud_path)
        rec.add_input(spheres)
        with rec.phase("render"):
            if cloud.dim == 2:
                render_svg(cloud, table.centers, table.radii, out, size=size)
            else:
                write_ply(table.centers, table.radii, out)
        rec.add_output(out)
        rec.finish(out)
    print(f"[ok]Figure écrite[/] — [bold]{out}[/]")


# ──────────────────────────────────────────────────────────────────────────────
# Reproductibilité : replay + registre local
# ──────────────────────────────────────────────────────────────────────────────
@app.command("replay")
def cmd_replay(
    manifest: Path = typer.Argument(..., help="Fichier *.manifest.json."),
):
    """Ré-exécute une commande et vérifie que ses sorties sont identiques bit à bit."""
    with _exit_codes():
        code, mismatches = replay_manifest(manifest)
    if code:
        print(f"[err]La commande rejouée a échoué (code {code}).[/]")
        raise typer.Exit(code=code)
    if mismatches:
        print("[err]Sorties différentes :[/]")
        for path, (want, got) in mismatches.items():
            print(f" • [bold]{path}[/] — attendu {want[:12]}…, obtenu {got[:12]}…")
        raise typer.Exit(code=EXIT_SOLVER)
    print("[ok]Replay identique ✔[/]")


@app.command("runs")
def cmd_runs(
    limit: int = typer.Option(20, "--limit", "-n", help="Nombre d'exécutions listées."),
    run_id: Optional[int] = typer.Option(None, "--id", help="Détaille une exécution (argv, empreintes, durées)."),
):
    """Liste les dernières exécutions du registre SQLite."""
    if run_id is not None:
        with _exit_codes():
            manifest = db.get_run(run_id)
            if manifest is None:
                raise BadInput(f"aucune exécution #{run_id} dans {db.db_path()}")
        _show_run(run_id, manifest)
        return
    rows = db.recent_runs(limit)
    table = Table(title=f"Exécutions — {db.db_path()}", show_header=True, header_style="accent")
    table.add_column("#", justify="right")
    table.add_column("Commande")
    table.add_column("Début")
    table.add_column("Durée", justify="right")
    table.add_column("Sorties", justify="right")
    for rid, command, _, seconds, manifest in rows:
        table.add_row(
            str(rid), command, iso_local(manifest.started),
            f"{seconds:.2f}s" if seconds is not None else "—", str(len(manifest.outputs)),
        )
    print(table)
    print(f"[muted]{db.counts()} exécution(s) enregistrée(s).[/]")


def _show_run(run_id: int, manifest) -> None:
    print(f"[accent]Exécution #{run_id}[/] — [bold]{manifest.command}[/]")
    print(f" • argv : {' '.join(manifest.argv)}")
    print(f" • début : {iso_local(manifest.started)}")
    if manifest.finished is not None:
        print(f" • fin : {iso_local(manifest.finished)}")
    table = Table(show_header=True, header_style="accent")
    table.add_column("Rôle")
    table.add_column("Fichier")
    table.add_column("SHA-1")
    for role, files in (("entrée", manifest.inputs), ("sortie", manifest.outputs)):
        for path, digest in files.items():
            table.add_row(role, path, digest[:12])
    print(table)
    for phase, seconds in manifest.timings.items():
        print(f" • {phase} : {seconds:.2f}s")


@app.command("runs-reset")
def cmd_runs_reset():
    """Vide le registre des exécutions."""
    n = db.reset_all()
    print(f"[ok]Registre réinitialisé[/] — exécutions supprimées : [bold]{n}[/]")


# ──────────────────────────────────────────────────────────────────────────────
if __name__ == "__main__":
    app()
