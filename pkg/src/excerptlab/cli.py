"""Command-line entry point: ``excerptlab <command> [options]``.

Every command prints a JSON summary on stdout that records its full
configuration and the package version. Files are written atomically. On
failure a JSON error object goes to stderr and the exit code is 2 for bad
configuration, 3 for bad data and 4 for numerical failure.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Callable, Iterable, Optional

import click
import numpy as np

from . import __version__
from .align import cross_correlate
from .audio import load_wav
from .errors import ConfigError, DataError, ExcerptLabError, NumericError
from .estimators import (
    did_m,
    dose_response,
    emit_event_study_table,
    event_study,
    interaction_did,
    synthetic_did,
    twfe_ols,
)
from .estimators.ols import FE_COLUMNS
from .panel import PanelDataset
from .repetition import decile_bin, encoded_length, get_codec, is_standard_preview
from .theory import DemandParams, SimPanelSpec, demand, demand_comparative_statics, demand_monte_carlo, simulate_panel
from .unpredictability import log_perplexity, model_bytes, tokenize, train_ar_model, train_quantizer

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


# --- plumbing ----------------------------------------------------------------


def thread_cap() -> int:
    """Worker count from ``EXCERPTLAB_THREADS`` (default 1)."""
    raw = os.environ.get("EXCERPTLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"EXCERPTLAB_THREADS={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError("EXCERPTLAB_THREADS must be at least 1")
    return n


def parallel_map(fn: Callable, items: Iterable) -> list:
    items = list(items)
    workers = min(thread_cap(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def run_config(ctx: click.Context) -> dict:
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(ctx.params.items())}
    return {"command": ctx.info_name, "options": params, "version": __version__}


def finish(ctx: click.Context, payload: dict, out: Optional[Path] = None) -> None:
    """Attach the run config, write ``out`` (if given) and echo the JSON."""
    doc = {"config": run_config(ctx), **payload}
    text = dump_json(doc)
    if out is not None:
        atomic_write(out, text)
    click.echo(text, nl=False)


def load_panel(path: Path, policy_period: int, allow_unbalanced: bool) -> PanelDataset:
    if not path.exists():
        raise DataError(f"{path}: no such file")
    return PanelDataset.read_csv(path, policy_period, allow_unbalanced=allow_unbalanced)


def parse_fe(text: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    unknown = [n for n in names if n not in FE_COLUMNS]
    if unknown:
        raise ConfigError(f"unknown fixed effect(s) {unknown}; choose from {sorted(FE_COLUMNS)}")
    return names


def wav_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".wav")
    if not files:
        raise DataError(f"{directory}: no .wav files")
    return files


def write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write(path, buf.getvalue())


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


# --- options shared by panel commands ------------------------------------------

_in = click.option("--in", "in_path", type=click.Path(path_type=Path), required=True, help="Panel CSV.")
_pp = click.option("--policy-period", type=int, required=True, help="Period index of the policy change.")
_cluster = click.option("--cluster", default="cluster_id", show_default=True, help="Clustering column.")
_unbal = click.option("--allow-unbalanced", is_flag=True, help="Accept units with missing periods.")
_fe = click.option("--fe", default="unit,period", show_default=True, help="Comma-separated fixed effects.")


def _out(required=False, help="Output path."):
    return click.option("--out", type=click.Path(path_type=Path), required=required, help=help)


@click.group()
@click.version_option(__version__, prog_name="excerptlab")
def cli():
    """Excerpt-length panel analysis and audio measurement tools."""


@cli.command()
@click.option("--spec", "spec_path", type=click.Path(path_type=Path), help="JSON simulation spec.")
@_out(required=True, help="Panel CSV to write.")
@click.option("--truth", type=click.Path(path_type=Path), help="JSON file for the planted truth.")
@click.option("--seed", type=int, help="Override the seed in the JSON config.")
@click.pass_context
def simulate(ctx, spec_path, out, truth, seed):
    """Draw a panel with a planted treatment effect."""
    raw = {}
    if spec_path is not None:
        try:
            raw = json.loads(Path(spec_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"{spec_path}: no such file") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{spec_path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError("simulation spec must be a JSON object")
    allowed = {f.name for f in fields(SimPanelSpec)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown simulation spec field(s): {', '.join(unknown)}")
    if seed is not None:
        raw["seed"] = seed
    try:
        spec = SimPanelSpec(**raw)
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    ds, planted = simulate_panel(spec)
    atomic_write(out, ds.to_csv())
    summary = {"rows": len(ds), "units": len(ds.units), "spec": spec.to_dict()}
    if truth is not None:
        atomic_write(truth, dump_json({"config": run_config(ctx), **planted}))
    finish(ctx, summary)


@cli.command()
@_in
@_pp
@_out()
@_cluster
@_fe
@_unbal
@click.option("--moderator", type=click.Choice(["popular_unit", "popular_artist"]), help="Add D x M interaction.")
@click.pass_context
def estimate(ctx, in_path, policy_period, out, cluster, fe, allow_unbalanced, moderator):
    """Two-way fixed-effects DiD (optionally moderated)."""
    ds = load_panel(in_path, policy_period, allow_unbalanced)
    fe_t = parse_fe(fe)
    if moderator:
        res = interaction_did(ds, moderator, fe=fe_t, cluster=cluster)
    else:
        res = twfe_ols(ds, fe=fe_t, cluster=cluster)
    finish(ctx, res.to_dict(), out)


@cli.command("event-study")
@_in
@_pp
@_out(required=True, help="Plot-ready CSV.")
@click.option("--json", "json_out", type=click.Path(path_type=Path), help="Full result JSON.")
@click.option("--reference", type=int, default=-1, show_default=True, help="Omitted event time.")
@click.option("--k-min", type=int, help="First event-time bin (default: earliest in panel).")
@click.option("--k-max", type=int, help="Last event-time bin (default: latest in panel).")
@_cluster
@_fe
@_unbal
@click.pass_context
def event_study_cmd(ctx, in_path, policy_period, out, json_out, reference, k_min, k_max, cluster, fe, allow_unbalanced):
    """Event-study leads and lags around the policy period."""
    ds = load_panel(in_path, policy_period, allow_unbalanced)
    rel = np.asarray(ds.periods) - policy_period
    k_min = int(rel.min()) if k_min is None else k_min
    k_max = int(rel.max()) if k_max is None else k_max
    res = event_study(ds, k_min, k_max, reference, fe=parse_fe(fe), cluster=cluster)
    atomic_write(out, emit_event_study_table(res))
    finish(ctx, res.to_dict(), json_out)


@cli.command("dose-response")
@_in
@_pp
@_out(required=True, help="Plot-ready CSV (k is the decile).")
@click.option("--json", "json_out", type=click.Path(path_type=Path), help="Full result JSON.")
@click.option("--reference", type=int, default=1, show_default=True, help="Omitted decile.")
@_cluster
@_fe
@_unbal
@click.pass_context
def dose_response_cmd(ctx, in_path, policy_period, out, json_out, reference, cluster, fe, allow_unbalanced):
    """Effects by measurement decile relative to a reference decile."""
    ds = load_panel(in_path, policy_period, allow_unbalanced)
    res = dose_response(ds, reference, fe=parse_fe(fe), cluster=cluster)
    atomic_write(out, emit_event_study_table(res))
    finish(ctx, res.to_dict(), json_out)


@cli.command("did-m")
@_in
@_pp
@_out()
@_cluster
@_unbal
@click.pass_context
def did_m_cmd(ctx, in_path, policy_period, out, cluster, allow_unbalanced):
    """Switch-period DiD robust to heterogeneous effects."""
    ds = load_panel(in_path, policy_period, allow_unbalanced)
    finish(ctx, did_m(ds, cluster=cluster).to_dict(), out)


@cli.command()
@_in
@_pp
@_out()
@click.option("--tol", type=float, default=1e-8, show_default=True, help="Relative duality-gap tolerance.")
@click.option("--max-iter", type=int, default=100_000, show_default=True)
@click.pass_context
def sdid(ctx, in_path, policy_period, out, tol, max_iter):
    """Synthetic difference-in-differences."""
    ds = load_panel(in_path, policy_period, False)
    res, w = synthetic_did(ds, tol=tol, max_iter=max_iter)
    payload = res.to_dict()
    payload["weights"] = {
        "unit": dict(zip(w.control_units, w.unit_weights.tolist())),
        "time": dict(zip([str(p) for p in w.pre_periods], w.time_weights.tolist())),
        "zeta": w.zeta,
    }
    finish(ctx, payload, out)


@cli.command()
@click.option("--excerpt", type=click.Path(path_type=Path), required=True)
@click.option("--recording", type=click.Path(path_type=Path), required=True)
@_out()
@click.pass_context
def align(ctx, excerpt, recording, out):
    """Find where an excerpt starts inside its recording."""
    res = cross_correlate(_read_wav(excerpt), _read_wav(recording))
    finish(ctx, res.to_dict(), out)


def _read_wav(path: Path):
    if not Path(path).exists():
        raise DataError(f"{path}: no such file")
    return load_wav(path)


@cli.command("measure-repetition")
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path), help="Directory of WAV clips.")
@_out(required=True, help="CSV of encoded lengths.")
@click.option("--codec", default="lzw", show_default=True, help="lzw or rle.")
@click.option("--previews-only", is_flag=True, help="Drop clips that are not 30 or 90 s long.")
@click.pass_context
def measure_repetition(ctx, in_path, out, codec, previews_only):
    """Encoded length per clip in a directory of WAV files, with deciles."""
    try:
        c = get_codec(codec)
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    files = wav_files(in_path)
    reports = parallel_map(lambda p: encoded_length(load_wav(p), c, unit_id=p.stem), files)
    dropped = 0
    if previews_only:
        kept = [r for r in reports if is_standard_preview(r.duration_s)]
        dropped = len(reports) - len(kept)
        reports = kept
    if not reports:
        raise DataError("no clips left to measure")
    _, labels = decile_bin([r.normalized for r in reports])
    reports = [r.with_decile(d) for r, d in zip(reports, labels)]
    header = ["unit_id", "codec", "payload_bytes", "duration_s", "normalized", "decile"]
    write_rows(out, header, [[_fmt(getattr(r, h)) for h in header] for r in reports])
    finish(ctx, {"clips": len(reports), "excluded": dropped})


@cli.command("measure-perplexity")
@click.option("--train", "train_dir", type=click.Path(path_type=Path), required=True, help="Training WAV directory.")
@click.option("--score", "score_dir", type=click.Path(path_type=Path), required=True, help="WAV directory to score.")
@_out(required=True, help="CSV of log-perplexities.")
@click.option("--vocab", type=int, default=64, show_default=True)
@click.option("--order", type=int, default=3, show_default=True)
@click.option("--alpha", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model-out", type=click.Path(path_type=Path), help="Persist the trained model.")
@click.pass_context
def measure_perplexity(ctx, train_dir, score_dir, out, vocab, order, alpha, seed, model_out):
    """Train a token model on one directory and score another."""
    if vocab < 1 or order < 1 or not alpha > 0:
        raise ConfigError("need --vocab >= 1, --order >= 1 and --alpha > 0")
    corpus = parallel_map(load_wav, wav_files(train_dir))
    q = train_quantizer(corpus, V=vocab, seed=seed)
    model = train_ar_model(parallel_map(lambda c: tokenize(c, q), corpus), n=order, alpha=alpha)
    targets = wav_files(score_dir)
    reports = parallel_map(lambda p: log_perplexity(tokenize(load_wav(p), q), model, unit_id=p.stem), targets)
    _, labels = decile_bin([r.log_perplexity for r in reports])
    header = ["unit_id", "log_perplexity", "tokens_scored", "per_token_mean", "decile"]
    rows = [[r.unit_id, repr(r.log_perplexity), r.tokens_scored, repr(r.per_token_mean), int(d)] for r, d in zip(reports, labels)]
    write_rows(out, header, rows)
    if model_out is not None:
        atomic_write(model_out, model_bytes(model, q))
    finish(ctx, {"clips": len(reports), "training_clips": len(corpus)})


@cli.command("demand")
@click.option("--p", "p", type=float, required=True, help="Prior match probability.")
@click.option("--theta", type=float, required=True, help="Excerpt informativeness.")
@click.option("--tau", type=float, required=True, help="Listening threshold.")
@click.option("--draws", type=int, default=0, show_default=True, help="Monte Carlo draws (0 to skip).")
@click.option("--seed", type=int, default=0, show_default=True)
@_out()
@click.pass_context
def demand_cmd(ctx, p, theta, tau, draws, seed, out):
    """Closed-form demand and its comparative statics."""
    try:
        params = DemandParams(p, theta, tau)
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    payload = {"demand": demand(params), "interior": params.interior}
    if params.interior:
        d1, d2 = demand_comparative_statics(params)
        payload.update(dD_dtheta=d1, d2D_dtheta_dp=d2)
    if draws > 0:
        payload["monte_carlo"] = demand_monte_carlo(params, draws, seed)
    finish(ctx, payload, out)


# --- entry point -------------------------------------------------------------


def _error_exit(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def run(argv: Optional[list[str]] = None) -> int:
    """Invoke the CLI and return its exit code instead of exiting."""
    try:
        cli.main(args=argv, prog_name="excerptlab", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return _error_exit("Aborted", "interrupted", 1)
    except click.ClickException as exc:
        return _error_exit(type(exc).__name__, exc.format_message(), EXIT_CONFIG)
    except ConfigError as exc:
        return _error_exit(type(exc).__name__, str(exc), EXIT_CONFIG)
    except NumericError as exc:
        return _error_exit(type(exc).__name__, str(exc), EXIT_NUMERIC)
    except (DataError, ExcerptLabError, OSError) as exc:
        return _error_exit(type(exc).__name__, str(exc), EXIT_DATA)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
