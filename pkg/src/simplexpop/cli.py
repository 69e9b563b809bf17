"""Command-line front end: ``simplexpop {train,eval,posterior-trace,rpp,jsd}``.

Exit codes: 0 on success, 1 on runtime failures (solver trouble, mismatched
checkpoints), 2 on usage errors (bad arguments, missing or malformed inputs).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .evaluation import (
    CANDIDATES,
    MonteCarlo,
    any_mixture_experiment,
    default_concentrations,
    exploitability,
    jsd_matrix,
    posterior_weighted_divergence,
    rpp,
)
from .experiment import (
    OUTPUT_DIR_ENV,
    EvalSettings,
    SchemaError,
    checkpoint_from_trainer,
    load_checkpoint,
    load_config,
    save_checkpoint,
    write_csv,
)
from .meta import cross_payoff_matrix, solve_zero_sum_nash, unique_rows
from .policy import SpecMismatchError, aggregate_mixture, check_mixture
from .posterior import initial_posterior, posterior_update
from .rollout import simulate
from .seeding import fork_rng
from .store import uniform_over
from .trainer import SimplexTrainer

log = logging.getLogger("simplexpop")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
PRINT_DECIMALS = 12


class UsageError(Exception):
    pass


def _out_dir(args, fallback: str) -> Path:
    return Path(args.out or os.environ.get(OUTPUT_DIR_ENV) or fallback)


def _read_checkpoint(path):
    if not Path(path).is_file():
        raise UsageError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


# --------------------------------------------------------------------- train


def cmd_train(args) -> int:
    if not Path(args.config).is_file():
        raise UsageError(f"config not found: {args.config}")
    config = load_config(args.config)
    out = config.resolved_output_dir(args.out)
    trainer = SimplexTrainer(config.trainer, config.spec)
    ckpt_path = out / "checkpoint.json"
    while not trainer.finished:
        record = trainer.step()
        log.info("iteration %d: N=%d gain=%.6g", record.iteration, record.population_size, record.gain)
        save_checkpoint(ckpt_path, checkpoint_from_trainer(trainer))
    (out / "config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")
    write_csv(out / "exploitability.csv", ["iteration", "value"], [(r.iteration, r.gain) for r in trainer.history])
    write_csv(
        out / "history.csv",
        ["iteration", "population_size", "gain", "expanded"],
        [(r.iteration, r.population_size, r.gain, int(r.expanded)) for r in trainer.history],
    )
    print(f"{ckpt_path}: {len(trainer.policies)} policies, {len(trainer.store)} store anchors")
    return EXIT_OK


# ---------------------------------------------------------------------- eval


def _eval_settings(args) -> EvalSettings:
    settings = load_config(args.config).eval if args.config else EvalSettings()
    overrides = {}
    if args.levels is not None:
        overrides["levels"] = [float(a) for a in args.levels.split(",") if a.strip()]
        if not overrides["levels"]:
            raise UsageError("empty level list")
    for name in ("samples", "episodes"):
        if getattr(args, name) is not None:
            overrides["samples_per_level" if name == "samples" else name] = getattr(args, name)
    if args.mode is not None:
        overrides["mode"] = args.mode
    try:
        return EvalSettings(**{**settings.to_dict(), **overrides})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_eval(args) -> int:
    ckpt = _read_checkpoint(args.checkpoint)
    settings = _eval_settings(args)
    out = _out_dir(args, str(Path(args.checkpoint).parent))
    snap = ckpt.snapshot
    reps = unique_rows(snap.meta_graph)
    levels = settings.levels if settings.levels is not None else default_concentrations(max(len(reps), 2))
    mode = "exact" if settings.mode == "exact" else MonteCarlo(settings.episodes)
    store = ckpt.store if len(ckpt.store) or ckpt.store.fill is not None else None
    if store is None:
        log.warning("checkpoint has no conditional policies; evaluating exact BR and NE mixture only")
    rng = fork_rng(args.seed, "any-mixture")
    report = any_mixture_experiment(snap, store, levels, settings.samples_per_level, rng, mode)
    write_csv(
        out / "any_mixture.csv",
        ["level", "alpha", "H", "candidate", "mean_return", "stderr"],
        [(r["level"], r["alpha"], r["H"], r["candidate"], r["mean_return"], r["stderr"]) for r in report.rows()],
    )
    ne = solve_zero_sum_nash(snap.payoffs).strategy
    rows = [(h["iteration"], h["gain"]) for h in ckpt.history]
    rows.append((len(ckpt.history), exploitability(ne, snap)))
    write_csv(out / "exploitability.csv", ["iteration", "value"], rows)
    for s in report.levels:
        cells = "  ".join(f"{c}={s.mean_return[c]:+.4f}" for c in CANDIDATES)
        print(f"alpha={s.alpha:.4g} H={s.mean_entropy:.3f}  {cells}")
    return EXIT_OK


# ----------------------------------------------------------- posterior-trace


def _parse_prior(text, n):
    if text in (None, "uniform"):
        return np.full(n, 1.0 / n)
    try:
        prior = np.array([float(x) for x in text.split(",")])
        return check_mixture(prior, n)
    except ValueError as exc:
        raise UsageError(f"invalid prior {text!r}: {exc}") from exc


def cmd_posterior_trace(args) -> int:
    ckpt = _read_checkpoint(args.checkpoint)
    snap = ckpt.snapshot
    n = len(snap)
    prior = _parse_prior(args.prior, n)
    episodes = args.episodes if args.episodes is not None else EvalSettings().posterior_episodes
    if episodes < 1:
        raise UsageError("episodes must be >= 1")
    reps = unique_rows(snap.meta_graph)
    uniform = uniform_over(reps, n)
    if len(ckpt.store) or ckpt.store.fill is not None:
        player = ckpt.store.lookup(uniform)
    else:
        player = aggregate_mixture(snap.policies, uniform)
    rng = fork_rng(args.seed, "posterior-trace")
    truth = rng.choice(n, size=episodes, p=prior)
    stack = np.stack([p.probs for p in snap.policies])
    eps = simulate(player.probs[None], np.zeros(episodes, dtype=np.int64), stack, truth, rng)
    K = snap.spec.num_cards
    rows = []
    for e in range(episodes):
        state = initial_posterior(prior, snap)
        rows.append((e, 0, int(truth[e]), *state.posterior))
        for t in range(K):
            state = posterior_update(state, int(eps.actions0[e, t]), int(eps.outcomes[e, t]), snap)
            rows.append((e, t + 1, int(truth[e]), *state.posterior))
    out = _out_dir(args, str(Path(args.checkpoint).parent))
    path = write_csv(
        out / "posterior_trace.csv", ["episode", "turn", "true_opponent", *[f"posterior_{j}" for j in range(n)]], rows
    )
    print(path)
    return EXIT_OK


# ----------------------------------------------------------------------- rpp


def _pair(args):
    a, b = _read_checkpoint(args.checkpoint_a), _read_checkpoint(args.checkpoint_b)
    if a.spec != b.spec:
        raise SpecMismatchError(f"checkpoints play different games: {a.spec} vs {b.spec}")
    return a, b


def cmd_rpp(args) -> int:
    a, b = _pair(args)
    U = cross_payoff_matrix(a.snapshot, b.snapshot)
    value = rpp(U)
    out = _out_dir(args, str(Path(args.checkpoint_a).parent))
    write_csv(out / "rpp.csv", ["i", "j", "value"], [(i, j, U[i, j]) for i in range(U.shape[0]) for j in range(U.shape[1])])
    # LP round-off below 1e-12 would otherwise print as e.g. 3e-33 for identical populations
    print(repr(round(value, PRINT_DECIMALS) + 0.0))
    return EXIT_OK


# ----------------------------------------------------------------------- jsd


def cmd_jsd(args) -> int:
    a, b = _pair(args)
    rng = fork_rng(args.seed, "jsd")
    D = jsd_matrix(a.snapshot, b.snapshot, args.episodes, rng)
    out = _out_dir(args, str(Path(args.checkpoint_a).parent))
    rows = [(i, j, D.values[i, j]) for i in range(D.values.shape[0]) for j in range(D.values.shape[1])]
    write_csv(out / "jsd.csv", ["i", "j", "value"], rows)
    if args.opponent is not None:
        if not 0 <= args.opponent < len(b.snapshot):
            raise UsageError(f"opponent index {args.opponent} out of range")
        reps = unique_rows(a.snapshot.meta_graph)
        uniform = uniform_over(reps, len(a.snapshot))
        player = a.store.lookup(uniform) if len(a.store) or a.store.fill is not None else None
        curve = posterior_weighted_divergence(
            D.values,
            a.snapshot,
            b.snapshot.policies[args.opponent],
            args.opponent,
            args.episodes,
            fork_rng(args.seed, "posterior-divergence"),
            row_policy=player,
        )
        write_csv(
            out / "divergence_curve.csv",
            ["turn", "weighted", "continuing"],
            [(t, curve.weighted[t], int(curve.continuing[t])) for t in range(len(curve.weighted))],
        )
    print(np.array2string(D.values, precision=4))
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simplexpop", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="grow a population and its conditional store")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="any-mixture returns and exploitability")
    p.add_argument("checkpoint")
    p.add_argument("--config", help="experiment config whose eval section to use")
    p.add_argument("--levels", help="comma-separated Dirichlet concentrations")
    p.add_argument("--samples", type=int)
    p.add_argument("--mode", choices=["exact", "montecarlo"])
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("posterior-trace", help="exact posterior over opponents along sampled episodes")
    p.add_argument("checkpoint")
    p.add_argument("--prior", default="uniform", help="'uniform' or comma-separated weights")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_posterior_trace)

    p = sub.add_parser("rpp", help="relative population performance of A against B")
    p.add_argument("checkpoint_a")
    p.add_argument("checkpoint_b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rpp)

    p = sub.add_parser("jsd", help="pairwise Jensen-Shannon divergence between two populations")
    p.add_argument("checkpoint_a")
    p.add_argument("checkpoint_b")
    p.add_argument("--episodes", type=int, default=EvalSettings().jsd_episodes)
    p.add_argument("--opponent", type=int, help="also trace the posterior-weighted divergence against B's policy j")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_jsd)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, SchemaError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"simplexpop {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"simplexpop {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
