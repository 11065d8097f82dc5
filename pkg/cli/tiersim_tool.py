from __future__ import annotations

import argparse
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

# Ajouter le package au PYTHONPATH pour import
sys.path.insert(0, str(Path(__file__).parent.parent))

from tiersim import config as cfg
from tiersim.analyzers.oracle import (
    UNITS,
    ObjectLayout,
    intrapage_skew,
    oracle_placement,
    sample_observability,
    trace_arrays,
)
from tiersim.generators.kv_workload import build_kv_heap
from tiersim.generators.trace_replay import TraceFormatError, TraceWriter, replay_trace
from tiersim.heap import SimulationError
from tiersim.main import configure_logging, run, run_summary
from tiersim.reports import write_csv, write_results, write_summaries

try:
    from rich.console import Console
    from rich.table import Table
except Exception:  # pragma: no cover
    Console = None
    Table = None

console = Console() if Console else None

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

SUMMARY_FIELDS = (
    "policy",
    "events",
    "fast_hit_ratio",
    "steady_hit_ratio",
    "steady_amat_ns",
    "amat_slowdown",
    "total_relocated_bytes",
    "total_migrated_bytes",
    "piggyback_phases",
    "dedicated_phases",
)


def _print_info(message: str) -> None:
    """Display an informative message, optionally using rich."""
    if console:
        console.print(message)
    else:
        print(message)


def _print_warning(message: str) -> None:
    """Display a warning message, optionally using rich styling."""
    if console:
        console.print(f"[yellow]{message}[/yellow]")
    else:
        print(message)


def _print_table(title: str, rows: Sequence[Dict[str, Any]]) -> None:
    if not rows:
        return
    columns = list(rows[0].keys())
    if console and Table:
        table = Table(title=title)
        for col in columns:
            table.add_column(col)
        for row in rows:
            table.add_row(*(_fmt(row[c]) for c in columns))
        console.print(table)
        return
    print(title)
    print(" | ".join(columns))
    for row in rows:
        print(" | ".join(_fmt(row[c]) for c in columns))


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _results_root(args: argparse.Namespace) -> Path:
    return Path(args.results_dir) if getattr(args, "results_dir", None) else cfg.results_dir()


# ------------------------------------------------------------------ commands

def cmd_run(args: argparse.Namespace) -> None:
    scenario = cfg.load_scenario(args.config, args.set or [], args.seed)
    writer = TraceWriter(args.emit_trace) if args.emit_trace else None
    try:
        result = run(scenario, event_sink=writer, event_log=args.event_log)
    finally:
        if writer is not None:
            writer.close()
    out_dir = _results_root(args)
    write_results(result, out_dir)
    _print_table(f"Scenario {scenario.name}", [{k: result.summary[k] for k in SUMMARY_FIELDS}])
    if writer is not None:
        _print_info(f"[+] Trace ecrite dans {writer.path} ({writer.count} evenements)")
    _print_info(f"[+] Resultats enregistres dans {out_dir / scenario.name}")


def _oracle_layout(args: argparse.Namespace, objects: np.ndarray) -> Tuple[ObjectLayout, int]:
    if args.config:
        scenario = cfg.load_scenario(args.config, args.set or [])
        kv = build_kv_heap(
            scenario.workload,
            region_size=scenario.heap.region_size,
            page_size=scenario.tier.page_size,
            large_object_threshold=scenario.heap.large_object_threshold,
            min_spare_regions=scenario.heap.min_spare_regions,
        )
        return ObjectLayout.from_heap(kv.heap), kv.footprint
    count = int(objects.max()) + 1 if len(objects) else 0
    layout = ObjectLayout.contiguous(count, args.object_size)
    return layout, int(layout.size.sum())


def cmd_oracle(args: argparse.Namespace) -> None:
    trace = Path(args.trace)
    if not trace.is_file():
        raise cfg.ConfigError(f"Trace introuvable: {trace}")
    objects, offsets = trace_arrays(replay_trace(trace))
    layout, footprint = _oracle_layout(args, objects)
    units = args.unit or list(UNITS)
    if args.capacity:
        capacities = [(c, c / footprint if footprint else 0.0) for c in args.capacity]
    else:
        capacities = [(int(f * footprint), f) for f in (args.fraction or [0.1, 0.2, 0.5])]

    rows: List[Dict[str, Any]] = []
    for capacity, fraction in capacities:
        row: Dict[str, Any] = {"capacity_bytes": capacity, "fraction": fraction}
        for unit in units:
            row[unit] = oracle_placement(objects, offsets, layout, unit, capacity)
        rows.append(row)
    if args.skew:
        counts = np.bincount(objects, minlength=layout.object_count) if len(objects) else np.zeros(0)
        skew = intrapage_skew(counts, layout)
        for row in rows:
            row["intrapage_skew"] = skew
    if args.observe_rate:
        seen = sample_observability(objects, args.top_fraction, args.observe_rate, args.seed or 0)
        for row in rows:
            row["observed_top_fraction"] = seen

    _print_table(f"Oracle {trace.name} ({len(objects)} acces)", rows)
    out = _results_root(args) / "oracle" / f"{trace.stem}.csv"
    write_csv(pd.DataFrame(rows), out)
    _print_info(f"[+] Rapport oracle enregistre dans {out}")


def parse_grid(specs: Sequence[str]) -> List[Tuple[str, List[str]]]:
    """`tier.fast_fraction=0.1,0.2` -> ("tier.fast_fraction", ["0.1", "0.2"])."""
    axes: List[Tuple[str, List[str]]] = []
    for spec in specs:
        if "=" not in spec:
            raise cfg.ConfigError(f"--grid attend path=v1,v2,... ; recu {spec!r}")
        key, values = spec.split("=", 1)
        choices = [v.strip() for v in values.split(",") if v.strip()]
        if not key.strip() or not choices:
            raise cfg.ConfigError(f"--grid vide: {spec!r}")
        axes.append((key.strip(), choices))
    return axes


def expand_grid(raw: Dict[str, Any], axes: Sequence[Tuple[str, List[str]]]) -> List[Tuple[Dict[str, str], Dict[str, Any]]]:
    points = []
    keys = [k for k, _ in axes]
    for combo in itertools.product(*(values for _, values in axes)):
        overrides = [f"{k}={v}" for k, v in zip(keys, combo)]
        points.append((dict(zip(keys, combo)), cfg.apply_overrides(raw, overrides)))
    return points


def cmd_sweep(args: argparse.Namespace) -> None:
    raw = cfg.apply_overrides(cfg.load_raw(args.config), args.set or [])
    if args.seed is not None:
        raw = cfg.apply_seed(raw, args.seed)
    axes = parse_grid(args.grid or [])
    axis_keys = [k for k, _ in axes]
    points = expand_grid(raw, axes)
    # fail fast on any invalid grid point before spending time on runs
    scenarios = [cfg.build_scenario(point) for _, point in points]
    jobs = args.jobs or cfg.sweep_jobs()
    raws = [s.model_dump(mode="json") for s in scenarios]
    _print_info(f"[*] Balayage de {len(raws)} scenarios avec {jobs} processus")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(run_summary, raws))
    else:
        summaries = [run_summary(r) for r in raws]

    rows = []
    for (axis_values, _), summary in zip(points, summaries):
        rows.append({**axis_values, **summary})
    name = scenarios[0].name if scenarios else "sweep"
    out = _results_root(args) / name / "sweep.csv"
    write_summaries(rows, out)
    _print_table(
        f"Balayage {name}",
        [{**{k: r[k] for k in axis_keys}, "steady_hit_ratio": r["steady_hit_ratio"]} for r in rows],
    )
    _print_info(f"[+] Resultats du balayage enregistres dans {out}")


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    """Create the top-level argument parser."""
    parser = argparse.ArgumentParser(description="Simulation de gestion de memoire hierarchisee par objet.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Journalisation DEBUG.")
    parser.add_argument("--results-dir", help="Repertoire des resultats (defaut: $TIERSIM_RESULTS_DIR ou results).")
    subparsers = parser.add_subparsers(dest="command")

    p_run = subparsers.add_parser("run", help="Executer un scenario et ecrire les CSV.")
    p_run.add_argument("config", help="Fichier de scenario YAML.")
    p_run.add_argument("--seed", type=int, default=None, help="Remplace la graine du scenario.")
    p_run.add_argument("--set", action="append", metavar="PATH=VALUE", help="Surcharge pointee (repetable).")
    p_run.add_argument("--emit-trace", metavar="PATH", help="Ecrire le flux d'evenements au format trace.")
    p_run.add_argument("--event-log", action="store_true", help="Ecrire events.csv (une ligne par acces).")
    p_run.set_defaults(func=cmd_run)

    p_oracle = subparsers.add_parser("oracle", help="Placement oracle hors ligne sur une trace.")
    p_oracle.add_argument("trace", help="Fichier trace (time_ns,site_id,context_id,object_id[,offset]).")
    p_oracle.add_argument("--unit", action="append", choices=list(UNITS), help="Granularite (repetable, defaut: toutes).")
    p_oracle.add_argument("--capacity", action="append", type=int, help="Capacite rapide en octets (repetable).")
    p_oracle.add_argument("--fraction", action="append", type=float, help="Capacite en fraction de l'empreinte (repetable).")
    p_oracle.add_argument("--config", help="Scenario dont le tas donne la disposition des objets.")
    p_oracle.add_argument("--set", action="append", metavar="PATH=VALUE", help="Surcharge du scenario.")
    p_oracle.add_argument("--object-size", type=int, default=256, help="Taille d'objet sans scenario (defaut: 256).")
    p_oracle.add_argument("--skew", action="store_true", help="Mesurer l'asymetrie intra-page.")
    p_oracle.add_argument("--observe-rate", type=int, help="Taux 1/R pour la visibilite des objets chauds.")
    p_oracle.add_argument("--top-fraction", type=float, default=0.01, help="Part des objets les plus chauds (defaut: 0.01).")
    p_oracle.add_argument("--seed", type=int, default=None, help="Graine du sous-echantillonnage.")
    p_oracle.set_defaults(func=cmd_oracle)

    p_sweep = subparsers.add_parser("sweep", help="Balayer une grille de parametres.")
    p_sweep.add_argument("config", help="Fichier de scenario YAML de base.")
    p_sweep.add_argument("--grid", action="append", metavar="PATH=V1,V2", help="Axe de la grille (repetable).")
    p_sweep.add_argument("--set", action="append", metavar="PATH=VALUE", help="Surcharge commune.")
    p_sweep.add_argument("--seed", type=int, default=None, help="Remplace la graine du scenario.")
    p_sweep.add_argument("--jobs", type=int, default=None, help="Processus paralleles (defaut: $TIERSIM_SWEEP_JOBS).")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Entrypoint for the CLI tool."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not hasattr(args, "func"):
        parser.print_help()
        sys.exit(EXIT_USAGE)

    configure_logging("DEBUG" if args.verbose else cfg.log_level())
    try:
        args.func(args)
    except ValidationError as exc:
        _print_warning("[!] Configuration invalide:")
        for line in cfg.format_validation_error(exc):
            _print_warning(f"    {line}")
        sys.exit(EXIT_USAGE)
    except (cfg.ConfigError, TraceFormatError, FileNotFoundError) as exc:
        _print_warning(f"[!] {exc}")
        sys.exit(EXIT_USAGE)
    except SimulationError as exc:
        _print_warning(f"[!] Erreur de simulation: {exc}")
        sys.exit(EXIT_RUNTIME)
    except Exception as exc:
        _print_warning(f"[!] Erreur: {exc}")
        sys.exit(EXIT_RUNTIME)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
