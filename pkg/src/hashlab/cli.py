"""Command-line entry point: simulate / serve / analyze / glm / extract.

Exit codes are a stable contract: 0 success, 2 usage or configuration
error, 3 data error (unreadable or inconsistent inputs). Every subcommand
prints the seed it ran with, so any output can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import asyncio
import configparser
import csv
import os
import secrets
import sys
from importlib import resources
from pathlib import Path

from . import agents as agents_mod
from . import causal, metrics
from .engine import Phase, RunConfig, simulate_run
from .glm import (
    DatasetError,
    Family,
    FitError,
    GlmFit,
    build_dataset,
    fit_beta_regression,
    fit_gaussian,
    fit_hurdle_poisson,
    fit_logistic,
    read_table,
)
from .runlog import LogLoadError, load_log, write_log
from .topology import InvalidConfigError, StructureKind

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

DEFAULT_BIND = "127.0.0.1:8765"
BIND_ENV = "HASHLAB_BIND"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _data_file(name: str) -> Path:
    with resources.as_file(resources.files("hashlab.data") / name) as p:
        return Path(p)


def _read_config_file(path: str) -> dict[str, str]:
    """Plain key=value config; a leading [section] header is optional."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser()
    try:
        if not text.lstrip().startswith("["):
            parser.read_string("[run]\n" + text)
        else:
            parser.read_string(text)
    except configparser.Error as exc:
        raise DataError(f"config file {path}: {exc}") from exc
    merged: dict[str, str] = {}
    for section in parser.sections():
        merged.update(parser[section])
    return merged


def _setting(args, config: dict[str, str], name: str, cast, default):
    """Flag beats config file beats default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        try:
            return cast(config[name])
        except ValueError as exc:
            raise UsageError(f"config key {name}={config[name]!r}: {exc}") from exc
    return default


def _structure(value: str) -> StructureKind:
    aliases = {
        "ring": StructureKind.SPATIAL_RING,
        "spatial": StructureKind.SPATIAL_RING,
        "complete": StructureKind.HOMOGENEOUS_COMPLETE,
        "homogeneous": StructureKind.HOMOGENEOUS_COMPLETE,
    }
    try:
        return aliases[value.lower()]
    except KeyError as exc:
        raise UsageError(
            f"unknown structure {value!r} (use ring or complete)"
        ) from exc


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(48)
    return seed


def _load_sim_inputs(args):
    params_path = args.agent_params or _data_file("agent_params.cfg")
    pool_path = args.seed_pool or _data_file("seed_pool.txt")
    params = agents_mod.load_agent_params(params_path)
    pool = agents_mod.load_seed_pool(pool_path)
    sampler = None
    if not getattr(args, "no_docs", False):
        corpus_path = args.corpus or _data_file("sim_corpus.txt")
        sampler = agents_mod.CorpusSampler(agents_mod.load_corpus(corpus_path), pool)
    return params, pool, sampler


def cmd_simulate(args) -> int:
    config = _read_config_file(args.config) if args.config else {}
    n = _setting(args, config, "n", int, 20)
    structure = _structure(str(_setting(args, config, "structure", str, "ring")))
    trials = _setting(args, config, "trials", int, 40)
    reps = _setting(args, config, "reps", int, 1)
    seed = _resolve_seed(_setting(args, config, "seed", int, None))
    out = Path(_setting(args, config, "out", str, "."))
    out.mkdir(parents=True, exist_ok=True)
    params, pool, sampler = _load_sim_inputs(args)

    print(f"seed: {seed}")
    series = []
    for rep in range(reps):
        rep_seed = seed + rep
        run_id = f"{args.run_prefix}{structure.value}-n{n}-s{rep_seed}"
        cfg = RunConfig(run_id=run_id, n=n, structure=structure, trials=trials, seed=rep_seed)
        population = agents_mod.make_population(n, pool, rep_seed, params)
        run_log = simulate_run(cfg, population, sampler)
        write_log(run_log, out / f"{run_id}.ndjson")
        s = metrics.metric_series(run_log)
        metrics.write_metric_table([s], out / f"{run_id}_metrics.tsv")
        series.append(s)
        final = s.values[-1]
        print(
            f"{run_id}: final dominance {final.dominance:.3f}, "
            f"final entropy {final.entropy:.3f}, "
            f"final coordination {final.coordination_rate:.3f}"
        )
    metrics.write_metric_table(series, out / "metrics_all.tsv")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import SessionHub, run_server

    config = _read_config_file(args.config) if args.config else {}
    n = _setting(args, config, "n", int, 20)
    structure = _structure(str(_setting(args, config, "structure", str, "ring")))
    trials = _setting(args, config, "trials", int, 40)
    seed = _resolve_seed(_setting(args, config, "seed", int, None))
    run_id = str(_setting(args, config, "run_id", str, f"live-{seed}"))
    deadline = _setting(args, config, "response_deadline", float, 60.0)
    lobby_timeout = _setting(args, config, "lobby_timeout", float, 600.0)
    doc_deadline = _setting(args, config, "doc_deadline", float, 600.0)
    out = Path(_setting(args, config, "out", str, "."))
    out.mkdir(parents=True, exist_ok=True)

    bind = args.bind or config.get("bind") or os.environ.get(BIND_ENV, DEFAULT_BIND)
    host, _, port_s = bind.rpartition(":")
    if not host or not port_s.isdigit():
        raise UsageError(f"bind address {bind!r} must be host:port")

    narrative_path = args.narrative or _data_file("narrative_fukushima.txt")
    narrative = Path(narrative_path).read_text(encoding="utf-8")

    cfg = RunConfig(
        run_id=run_id,
        n=n,
        structure=structure,
        trials=trials,
        seed=seed,
        response_deadline=deadline,
    )
    hub = SessionHub()
    hub.open_run(
        cfg,
        narrative,
        log_path=out / f"{run_id}.ndjson",
        lobby_timeout=lobby_timeout,
        doc_deadline=doc_deadline,
    )
    print(f"seed: {seed}", flush=True)
    print(f"run {run_id}: n={n} structure={structure.value} trials={trials}", flush=True)

    async def serve_until_done() -> None:
        ready = asyncio.get_running_loop().create_future()
        server = asyncio.create_task(run_server(hub, host, int(port_s), ready))
        bound_port = await ready
        print(
            f"listening on ws://{host}:{bound_port}/ws/{run_id} "
            f"(health: http://{host}:{bound_port}/health)",
            flush=True,
        )
        run = hub.get(run_id)
        assert run is not None
        await run.finished.wait()
        print(f"run {run_id} finished: {run.state.phase.value}", flush=True)
        server.cancel()
        try:
            await server
        except asyncio.CancelledError:
            pass

    try:
        asyncio.run(serve_until_done())
    except KeyboardInterrupt:
        print("interrupted")
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logs = []
    failures: list[tuple[str, str]] = []
    for path in args.logs:
        try:
            run_log = load_log(path)
            if run_log.config is None:
                raise LogLoadError(f"{path}: empty run log")
        except (LogLoadError, FileNotFoundError) as exc:
            failures.append((str(path), str(exc)))
            continue
        logs.append(run_log)

    series = []
    for run_log in logs:
        run_id = run_log.config.run_id
        s = metrics.metric_series(run_log)
        series.append(s)
        metrics.write_metric_table([s], out / f"{run_id}_metrics.tsv")
        clusters = metrics.local_clusters(
            metrics.final_responses(run_log), run_log.topology
        )
        metrics.write_clusters(clusters, out / f"{run_id}_clusters.tsv")
        grid = metrics.colormap_grid(run_log)
        metrics.write_colormap(
            grid, out / f"{run_id}_colormap.tsv", out / f"{run_id}_colormap_ids.tsv"
        )
        final = s.values[-1]
        print(
            f"{run_id}: trials {len(s.values)}, final dominance {final.dominance:.3f}, "
            f"final entropy {final.entropy:.3f}, clusters {len(clusters)}"
        )
    metrics.write_metric_table(series, out / "metrics_all.tsv")
    metrics.write_pair_table(logs, out / "pairs_all.tsv")
    if failures:
        for path, problem in failures:
            print(f"data error: {path}: {problem}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


_FAMILY_FITS = {
    Family.BETA_LOGIT: fit_beta_regression,
    Family.GAUSSIAN: fit_gaussian,
    Family.BERNOULLI_LOGIT: fit_logistic,
    Family.HURDLE_POISSON: fit_hurdle_poisson,
}


def _write_coefficients(fit: GlmFit, path: Path, level: float = 0.95) -> None:
    from scipy import stats

    z = float(stats.norm.ppf(0.5 + level / 2.0))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["name", "estimate", "se", "lower", "upper"])
        for name, est, se in zip(fit.columns, fit.beta, fit.se):
            w.writerow(
                [name, f"{est:.8g}", f"{se:.8g}", f"{est - z * se:.8g}", f"{est + z * se:.8g}"]
            )
        if fit.hu is not None:
            se = fit.hu_se or 0.0
            w.writerow(
                ["hu", f"{fit.hu:.8g}", f"{se:.8g}", f"{fit.hu - z * se:.8g}", f"{fit.hu + z * se:.8g}"]
            )
        if fit.phi is not None:
            w.writerow(["phi", f"{fit.phi:.8g}", "", "", ""])


def cmd_glm(args) -> int:
    try:
        family = Family(args.family)
    except ValueError as exc:
        raise UsageError(
            f"unknown family {args.family!r} (choose from "
            f"{', '.join(f.value for f in Family)})"
        ) from exc
    try:
        frame = read_table(args.table)
        data = build_dataset(
            frame,
            response=args.response,
            predictors=[c for c in (args.predictors or "").split(",") if c],
            interactions=[s for s in (args.interactions or "").split(",") if s],
            subject=args.subject,
            intercept=not args.no_intercept,
        )
    except (DatasetError, FileNotFoundError) as exc:
        raise DataError(str(exc)) from exc

    kwargs = {"prior_sd": args.prior_sd}
    if family is Family.HURDLE_POISSON:
        kwargs["subject_sd"] = args.subject_sd
    try:
        fit = _FAMILY_FITS[family](data, **kwargs)
    except (FitError, DatasetError) as exc:
        raise DataError(str(exc)) from exc

    _write_coefficients(fit, Path(args.out))
    print(
        f"{family.value}: loglik {fit.loglik:.3f}, converged {fit.converged} "
        f"({fit.iterations} iterations)"
    )
    for name, est, se in zip(fit.columns, fit.beta, fit.se):
        print(f"  {name:>20} {est:+.4f} (se {se:.4f})")
    if fit.hu is not None:
        print(f"  {'hu':>20} {fit.hu:+.4f} (se {fit.hu_se:.4f})")
    if fit.phi is not None:
        print(f"  {'phi':>20} {fit.phi:+.4f}")
    return EXIT_OK


def _corpus_rows(args) -> list[dict]:
    """Normalized document rows: phase, group, subject, text."""
    rows: list[dict] = []
    if args.from_log:
        for path in args.from_log:
            try:
                run_log = load_log(path)
            except LogLoadError as exc:
                raise DataError(str(exc)) from exc
            if run_log.config is None:
                raise DataError(f"{path}: empty run log")
            cfg = run_log.config
            for doc in run_log.documents:
                rows.append(
                    {
                        "phase": doc.phase.value,
                        "group": cfg.structure.value,
                        "run": cfg.run_id,
                        "subject": f"{cfg.run_id}:{doc.node}",
                        "text": doc.tweet,
                    }
                )
    if args.corpus:
        frame = read_table(args.corpus)
        for col in (args.phase_col, args.text_col):
            if col not in frame.columns:
                raise DataError(f"{args.corpus}: missing column {col!r}")
        for i, rec in frame.iterrows():
            rows.append(
                {
                    "phase": str(rec[args.phase_col]).lower(),
                    "group": str(rec[args.group_col]) if args.group_col in frame.columns else "all",
                    "run": str(rec.get("run_id", "corpus")),
                    "subject": str(rec.get("subject", f"doc{i}")),
                    "text": str(rec[args.text_col]),
                }
            )
    if not rows:
        raise UsageError("extract needs --corpus and/or --from-log inputs")
    bad = {r["phase"] for r in rows} - {Phase.PRE.value, Phase.POST.value}
    if bad:
        raise DataError(f"unknown phase values {sorted(bad)} (want pre/post)")
    return rows


def cmd_extract(args) -> int:
    triggers = (
        causal.TriggerLexicon.load(args.triggers) if args.triggers else causal.DEFAULT_TRIGGERS
    )
    try:
        lexicon = (
            causal.TopicLexicon.load(args.topics) if args.topics else causal.TopicLexicon.default()
        )
    except (causal.LexiconError, FileNotFoundError) as exc:
        raise DataError(str(exc)) from exc
    rows = _corpus_rows(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "claims.tsv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["subject", "run", "group", "phase", "spatial", "post", "claims"])
        for r in rows:
            n_claims = len(causal.extract_claims(r["text"], triggers))
            w.writerow(
                [
                    r["subject"],
                    r["run"],
                    r["group"],
                    r["phase"],
                    1 if r["group"] == StructureKind.SPATIAL_RING.value else 0,
                    1 if r["phase"] == Phase.POST.value else 0,
                    n_claims,
                ]
            )

    groups = sorted({r["group"] for r in rows})
    for group in groups:
        per_phase = {}
        for phase in (Phase.PRE.value, Phase.POST.value):
            docs = [r["text"] for r in rows if r["group"] == group and r["phase"] == phase]
            matrix = causal.claim_matrix(docs, triggers, lexicon)
            matrix.write(out / f"counts_{group}_{phase}.tsv")
            per_phase[phase] = matrix
        runs = {r["run"] for r in rows if r["group"] == group}
        group_count = args.group_count or max(len(runs), 1)
        diff = causal.diff_matrix(per_phase["post"], per_phase["pre"], group_count)
        diff.write(out / f"diff_{group}.tsv")
        top = _top_cells(diff, 3)
        print(f"group {group}: diff over {group_count} run(s); strongest shifts: {top}")
    return EXIT_OK


def _top_cells(matrix: causal.TopicMatrix, k: int) -> str:
    import numpy as np

    flat = [
        (abs(v), matrix.labels[i], matrix.labels[j], v)
        for (i, j), v in np.ndenumerate(matrix.values)
        if v != 0
    ]
    flat.sort(reverse=True)
    return (
        ", ".join(f"{c}->{e} {v:+.3g}" for _, c, e, v in flat[:k]) if flat else "(none)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hashlab",
        description="Networked hashtag coordination games and their measurement pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run seeded simulations and export logs/metrics")
    sim.add_argument("--config", help="key=value config file")
    sim.add_argument("--n", type=int, help="players (even)")
    sim.add_argument("--structure", help="ring | complete")
    sim.add_argument("--trials", type=int, help="trials per run (default 40)")
    sim.add_argument("--reps", type=int, help="independent runs (default 1)")
    sim.add_argument("--seed", type=int, help="base seed (default: random, printed)")
    sim.add_argument("--out", help="output directory (default .)")
    sim.add_argument("--run-prefix", default="", help="prefix for run ids")
    sim.add_argument("--agent-params", help="agent parameter file")
    sim.add_argument("--seed-pool", help="seed-pool file")
    sim.add_argument("--corpus", help="document corpus file")
    sim.add_argument("--no-docs", action="store_true", help="skip pre/post documents")
    sim.set_defaults(func=cmd_simulate)

    srv = sub.add_parser("serve", help="host a live run over WebSockets")
    srv.add_argument("--config", help="key=value config file")
    srv.add_argument("--bind", help=f"host:port (default ${BIND_ENV} or {DEFAULT_BIND})")
    srv.add_argument("--n", type=int)
    srv.add_argument("--structure")
    srv.add_argument("--trials", type=int)
    srv.add_argument("--seed", type=int)
    srv.add_argument("--run-id", dest="run_id")
    srv.add_argument("--response-deadline", dest="response_deadline", type=float)
    srv.add_argument("--lobby-timeout", dest="lobby_timeout", type=float)
    srv.add_argument("--doc-deadline", dest="doc_deadline", type=float)
    srv.add_argument("--out", help="log directory")
    srv.add_argument("--narrative", help="narrative text file")
    srv.set_defaults(func=cmd_serve)

    ana = sub.add_parser("analyze", help="re-derive metrics and grids from run logs")
    ana.add_argument("logs", nargs="+", help="run log files")
    ana.add_argument("--out", required=True, help="output directory")
    ana.set_defaults(func=cmd_analyze)

    glm = sub.add_parser("glm", help="fit a regression family to a delimited table")
    glm.add_argument("table", help="input table (TSV/CSV with header)")
    glm.add_argument("--family", required=True, help=", ".join(f.value for f in Family))
    glm.add_argument("--response", required=True)
    glm.add_argument("--predictors", help="comma-separated predictor columns")
    glm.add_argument("--interactions", help="comma-separated a:b pairs")
    glm.add_argument("--subject", help="subject-id column (hurdle-poisson)")
    glm.add_argument("--prior-sd", dest="prior_sd", type=float, default=10.0)
    glm.add_argument("--subject-sd", dest="subject_sd", type=float, default=1.0)
    glm.add_argument("--no-intercept", dest="no_intercept", action="store_true")
    glm.add_argument("--out", required=True, help="coefficient table output path")
    glm.set_defaults(func=cmd_glm)

    ext = sub.add_parser("extract", help="causal-claim matrices from documents")
    ext.add_argument("--corpus", help="table with phase/text (and group) columns")
    ext.add_argument("--from-log", dest="from_log", nargs="*", help="run logs with documents")
    ext.add_argument("--topics", help="topic lexicon file")
    ext.add_argument("--triggers", help="trigger lexicon file")
    ext.add_argument("--phase-col", dest="phase_col", default="phase")
    ext.add_argument("--group-col", dest="group_col", default="group")
    ext.add_argument("--text-col", dest="text_col", default="text")
    ext.add_argument("--group-count", dest="group_count", type=int)
    ext.add_argument("--out", required=True, help="output directory")
    ext.set_defaults(func=cmd_extract)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
