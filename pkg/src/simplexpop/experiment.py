"""Experiment configuration, checkpoints and CSV output.

Everything written here is deterministic: JSON is dumped with sorted keys and
checkpoints are replaced atomically, so two runs with the same configuration
produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .game import GameSpec, InvalidSpecError
from .policy import PopulationSnapshot, TabularPolicy
from .store import AnchorGrid, ConditionalPolicyStore
from .trainer import AbrKind, IterationRecord, SimplexTrainer, TrainerConfig, attach_exact_fill

__all__ = [
    "SCHEMA_VERSION",
    "OUTPUT_DIR_ENV",
    "SchemaError",
    "EvalSettings",
    "ExperimentConfig",
    "Checkpoint",
    "load_config",
    "checkpoint_from_trainer",
    "checkpoint_to_dict",
    "checkpoint_from_dict",
    "history_records",
    "save_checkpoint",
    "load_checkpoint",
    "write_json_atomic",
    "write_csv",
]

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "SIMPLEXPOP_OUTPUT_DIR"


class SchemaError(ValueError):
    """A config or checkpoint file does not have the expected structure."""


@dataclass(frozen=True)
class EvalSettings:
    levels: tuple[float, ...] | None = None  # None: the default seven concentrations
    samples_per_level: int = 64
    mode: str = "exact"  # "exact" or "montecarlo"
    episodes: int = 32
    jsd_episodes: int = 256
    posterior_episodes: int = 8

    def __post_init__(self):
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(float(a) for a in self.levels))
            if not self.levels:
                raise ValueError("level list is empty")
            if any(not a > 0 for a in self.levels):
                raise ValueError("concentration levels must be positive")
        if self.mode not in ("exact", "montecarlo"):
            raise ValueError(f"eval mode must be 'exact' or 'montecarlo', got {self.mode!r}")
        for name in ("samples_per_level", "episodes", "jsd_episodes", "posterior_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return {
            "levels": None if self.levels is None else list(self.levels),
            "samples_per_level": self.samples_per_level,
            "mode": self.mode,
            "episodes": self.episodes,
            "jsd_episodes": self.jsd_episodes,
            "posterior_episodes": self.posterior_episodes,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    spec: GameSpec = field(default_factory=GameSpec)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    output_dir: str = "runs/default"
    seed: int = 0

    def __post_init__(self):
        if self.trainer.rng_seed != self.seed:
            object.__setattr__(self, "trainer", replace(self.trainer, rng_seed=self.seed))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "game": self.spec.to_dict(),
            "trainer": self.trainer.to_dict(),
            "eval": self.eval.to_dict(),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise SchemaError("config must be a JSON object")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise SchemaError(f"unsupported config schema_version {version}")
        unknown = set(data) - {"schema_version", "game", "trainer", "eval", "output_dir", "seed"}
        if unknown:
            raise SchemaError(f"unknown config sections: {sorted(unknown)}")
        try:
            trainer = dict(data.get("trainer", {}))
            seed = int(data.get("seed", trainer.get("rng_seed", 0)))
            trainer["rng_seed"] = seed
            return cls(
                spec=GameSpec.from_dict(data.get("game", {"num_cards": 5})),
                trainer=TrainerConfig.from_dict(trainer),
                eval=EvalSettings(**data.get("eval", {})),
                output_dir=str(data.get("output_dir", "runs/default")),
                seed=seed,
            )
        except (TypeError, ValueError, InvalidSpecError) as exc:
            raise SchemaError(f"invalid config: {exc}") from exc

    def resolved_output_dir(self, override: str | None = None) -> Path:
        """Command-line override, then the environment variable, then the config value."""
        return Path(override or os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)


def load_config(path) -> ExperimentConfig:
    """Read an experiment config; ``FileNotFoundError`` propagates for missing files."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)


# ------------------------------------------------------------------ checkpoints


@dataclass
class Checkpoint:
    config: TrainerConfig
    snapshot: PopulationSnapshot
    store: ConditionalPolicyStore
    history: list[dict]
    rounds: int = 0
    finished: bool = True

    @property
    def spec(self) -> GameSpec:
        return self.snapshot.spec


def checkpoint_from_trainer(trainer: SimplexTrainer) -> Checkpoint:
    return Checkpoint(
        config=trainer.config,
        snapshot=trainer.snapshot(),
        store=trainer.store,
        history=[r.to_dict() for r in trainer.history],
        rounds=trainer.rounds,
        finished=trainer.finished,
    )


def _store_to_dict(store: ConditionalPolicyStore) -> dict:
    unique = store.unique_policies()
    index = {id(p): i for i, p in enumerate(unique)}
    grid = store.grid
    return {
        "dim": store.dim,
        "grid": None if grid is None else {"support": [int(i) for i in grid.support], "resolution": grid.resolution},
        "anchors": [{"sigma": list(a), "policy": index[id(p)]} for a, p in store.items()],
        "policies": [p.to_json_dict() for p in unique],
    }


def _store_from_dict(spec: GameSpec, data: dict) -> ConditionalPolicyStore:
    dim = int(data["dim"])
    grid = data.get("grid")
    store = ConditionalPolicyStore(
        dim, None if grid is None else AnchorGrid(tuple(int(i) for i in grid["support"]), dim, int(grid["resolution"]))
    )
    policies = [TabularPolicy.from_json_dict(spec, p) for p in data["policies"]]
    for entry in data["anchors"]:
        sigma = np.asarray(entry["sigma"], dtype=np.float64)
        if sigma.shape != (dim,):
            raise SchemaError(f"store anchor has {sigma.size} entries, expected {dim}")
        store.put(sigma, policies[int(entry["policy"])])
    return store


def checkpoint_to_dict(ckpt: Checkpoint) -> dict:
    snap = ckpt.snapshot
    return {
        "schema_version": SCHEMA_VERSION,
        "spec": snap.spec.to_dict(),
        "config": ckpt.config.to_dict(),
        "policies": [p.to_json_dict() for p in snap.policies],
        "meta_graph": snap.meta_graph.tolist(),
        "payoffs": snap.payoffs.tolist(),
        "store": _store_to_dict(ckpt.store),
        "history": ckpt.history,
        "rng": {"seed": ckpt.config.rng_seed, "rounds": ckpt.rounds},
        "finished": ckpt.finished,
    }


def checkpoint_from_dict(data: dict) -> Checkpoint:
    if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError("not a checkpoint of a supported schema_version")
    try:
        spec = GameSpec.from_dict(data["spec"])
        config = TrainerConfig.from_dict(data["config"])
        policies = [TabularPolicy.from_json_dict(spec, p) for p in data["policies"]]
        snapshot = PopulationSnapshot(spec, policies, np.asarray(data["meta_graph"]), np.asarray(data["payoffs"]))
        store = _store_from_dict(spec, data["store"])
        history = list(data["history"])
        rounds = int(data["rng"]["rounds"])
        finished = bool(data.get("finished", True))
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError, IndexError, InvalidSpecError) as exc:
        raise SchemaError(f"malformed checkpoint: {exc}") from exc
    if config.abr_kind is AbrKind.EXACT and finished:
        attach_exact_fill(store, snapshot)
    return Checkpoint(config, snapshot, store, history, rounds, finished)


def write_json_atomic(path, data) -> Path:
    """Dump ``data`` with sorted keys to a temp file beside ``path``, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    return write_json_atomic(path, checkpoint_to_dict(ckpt))


def load_checkpoint(path) -> Checkpoint:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return checkpoint_from_dict(data)


def history_records(ckpt: Checkpoint) -> list[IterationRecord]:
    return [
        IterationRecord(
            h["iteration"],
            h["population_size"],
            np.asarray(h["payoffs"]),
            np.asarray(h["meta_graph"]),
            np.asarray(h["frontier"]),
            h["gain"],
            h["expanded"],
        )
        for h in ckpt.history
    ]


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
