"""Negative-sampling training: batching, Adam, checkpointing, seeding.

Each batch holds instances of a single query structure, so they share one
slot template and embed as a matrix batch; the structure itself is drawn
uniformly at random per step, which mixes structures across batches without
any per-structure schedule.  Training minimises the margin loss of the
answer cones against uniformly sampled negative entities.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .model import (
    ConeBatch,
    ModelParams,
    ParameterStore,
    dnf_entity_distance,
    embed_structure,
    entity_points,
    margin_loss,
)
from .queries import ALL_STRUCTURES, KnowledgeGraph, QueryInstance, sample_instance

__all__ = [
    "PROFILES",
    "TrainingConfig",
    "TrainingDiverged",
    "TrainState",
    "MultiSeedReport",
    "parse_config_file",
    "resolve_config",
    "sample_negatives",
    "adam_step",
    "init_state",
    "batch_loss_and_grads",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "multi_seed",
    "gradient_check_model",
]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

#: Named bundles of config defaults; "toy" is the desk-scale profile.
PROFILES: dict[str, dict[str, object]] = {
    "toy": {"d": 32, "b": 64, "n": 16},
}

# config-file key -> (dataclass field, parser).  "lambda" maps to "lam"
# because of the Python keyword.
_CONFIG_FILE_KEYS: dict[str, tuple[str, type]] = {
    "d": ("d", int),
    "b": ("b", int),
    "n": ("n", int),
    "gamma": ("gamma", float),
    "lr": ("lr", float),
    "lambda": ("lam", float),
    "seed": ("seed", int),
    "steps": ("steps", int),
}


@dataclass(frozen=True)
class TrainingConfig:
    """The hyperparameter surface.

    ``d`` embedding dimensions, ``b`` batch size, ``n`` negatives per
    instance, ``gamma`` loss margin, ``lr`` Adam step size, ``lam`` weight of
    the inside-cone distance term.  The remaining knobs control the loop
    itself and are CLI-only.
    """

    d: int = 800
    b: int = 512
    n: int = 128
    gamma: float = 20.0
    lr: float = 1e-4
    lam: float = 0.02
    seed: int = 0
    steps: int = 2000
    rotation_mode: str = "additive"
    checkpoint_every: int = 1000
    eval_every: int = 1000
    patience: int = 5
    threads: int = 1
    deterministic: bool = False

    def __post_init__(self) -> None:
        for name in ("d", "b", "n", "steps", "checkpoint_every", "eval_every",
                     "patience", "threads"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.gamma <= 0.0:
            raise ValueError("gamma (margin) must be positive")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.lam < 0.0:
            raise ValueError("lambda must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.rotation_mode not in ("additive", "multiplicative"):
            raise ValueError("rotation_mode must be 'additive' or 'multiplicative'")


def parse_config_file(path: str) -> dict[str, object]:
    """Read a key=value config file into a dict of TrainingConfig overrides.

    Recognised keys: d, b, n, gamma, lr, lambda, seed, steps.  Blank lines
    and #-comments (full-line or trailing) are ignored.
    """
    overrides: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_FILE_KEYS:
                known = ", ".join(sorted(_CONFIG_FILE_KEYS))
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r} (known: {known})")
            name, cast = _CONFIG_FILE_KEYS[key]
            try:
                overrides[name] = cast(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad {key} value {value!r}") from exc
    return overrides


def resolve_config(*, profile: str | None = None,
                   file_overrides: dict[str, object] | None = None,
                   cli_overrides: dict[str, object] | None = None) -> TrainingConfig:
    """Merge config sources; precedence: CLI flag > file > profile > default.

    ``cli_overrides`` entries whose value is None count as "flag not given".
    """
    merged: dict[str, object] = {}
    if profile is not None:
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r} (known: {sorted(PROFILES)})")
        merged.update(PROFILES[profile])
    merged.update(file_overrides or {})
    merged.update({k: v for k, v in (cli_overrides or {}).items() if v is not None})
    return TrainingConfig(**merged)


# ---------------------------------------------------------------------------
# negative sampling
# ---------------------------------------------------------------------------

def sample_negatives(instance: QueryInstance, k: int, rng: np.random.Generator,
                     n_entities: int) -> np.ndarray:
    """k entities drawn uniformly from those that do not answer the query.

    Draws without replacement while the complement is large enough, with
    replacement otherwise.  Raises when every entity is an answer.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    known = np.unique(np.array(instance.easy + instance.hard, dtype=np.int64))
    complement = np.setdiff1d(np.arange(n_entities, dtype=np.int64), known,
                              assume_unique=True)
    if complement.size == 0:
        raise ValueError("every entity answers this query; no negatives exist")
    return rng.choice(complement, size=k, replace=complement.size < k)


# ---------------------------------------------------------------------------
# optimizer and train state
# ---------------------------------------------------------------------------

def _zero_moments(store: ParameterStore) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(store.arrays[name]) for name in store.trainable_names()}


def adam_step(store: ParameterStore, grads: dict[str, np.ndarray],
              m: dict[str, np.ndarray], v: dict[str, np.ndarray], t: int,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One in-place Adam update; ``t`` is the 1-based step count."""
    if t < 1:
        raise ValueError("Adam step count is 1-based")
    bias1 = 1.0 - beta1 ** t
    bias2 = 1.0 - beta2 ** t
    for name in store.trainable_names():
        g = grads[name]
        m[name] = beta1 * m[name] + (1.0 - beta1) * g
        v[name] = beta2 * v[name] + (1.0 - beta2) * g * g
        store.arrays[name] -= lr * (m[name] / bias1) / (np.sqrt(v[name] / bias2) + eps)


@dataclass
class TrainState:
    """Everything needed to continue (or evaluate) a run: parameters, Adam
    moments, step counter, the batching rng, and running loss summaries."""

    store: ParameterStore
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int
    rng: np.random.Generator
    running_loss: float
    per_structure: dict[str, float]
    config: TrainingConfig
    entity_names: list[str] | None = None
    relation_names: list[str] | None = None


def init_state(cfg: TrainingConfig, n_entities: int, n_relations: int, *,
               entity_names: list[str] | None = None,
               relation_names: list[str] | None = None) -> TrainState:
    store = ParameterStore(n_entities, n_relations, cfg.d, seed=cfg.seed,
                           rotation_mode=cfg.rotation_mode, margin=cfg.gamma)
    return TrainState(
        store=store,
        adam_m=_zero_moments(store),
        adam_v=_zero_moments(store),
        step=0,
        # separate stream from the parameter-init draw of the same seed
        rng=np.random.default_rng([cfg.seed, 1]),
        running_loss=float("nan"),
        per_structure={},
        config=cfg,
        entity_names=list(entity_names) if entity_names is not None else None,
        relation_names=list(relation_names) if relation_names is not None else None,
    )


# ---------------------------------------------------------------------------
# loss and gradients
# ---------------------------------------------------------------------------

def _shard_bounds(size: int, shards: int) -> list[tuple[int, int]]:
    shards = max(1, min(shards, size))
    base, extra = divmod(size, shards)
    bounds, lo = [], 0
    for i in range(shards):
        hi = lo + base + (1 if i < extra else 0)
        bounds.append((lo, hi))
        lo = hi
    return bounds


def batch_loss_and_grads(store: ParameterStore, tag: str, anchors, relations,
                         positives, negatives, *, lam: float, threads: int = 1,
                         deterministic: bool = True) -> tuple[float, dict[str, np.ndarray]]:
    """Mean margin loss of one single-structure batch plus its gradients.

    ``anchors`` is (batch, anchor slots), ``relations`` (batch, relation
    slots), ``positives`` (batch,), ``negatives`` (batch, k).  With
    ``threads`` > 1 the batch splits into contiguous shards whose gradients
    are weight-summed by one accumulator; unless ``deterministic``, shards
    join in completion order, so float summation order may vary run to run.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    relations = np.asarray(relations, dtype=np.int64)
    positives = np.asarray(positives, dtype=np.int64)
    negatives = np.asarray(negatives, dtype=np.int64)
    size = positives.shape[0]
    if size == 0:
        raise ValueError("empty batch")

    def run_shard(lo: int, hi: int) -> tuple[float, dict[str, np.ndarray]]:
        tape = ad.Tape()
        m = store.tensors(tape)
        disjuncts = embed_structure(m, tag, anchors[lo:hi], relations[lo:hi])
        pos_dist = dnf_entity_distance(disjuncts, entity_points(m, positives[lo:hi]), lam)
        wide = [
            ConeBatch(ad.reshape(c.axis, (hi - lo, 1, store.d)),
                      ad.reshape(c.aperture, (hi - lo, 1, store.d)))
            for c in disjuncts
        ]
        neg_dist = dnf_entity_distance(wide, entity_points(m, negatives[lo:hi]), lam)
        loss = margin_loss(pos_dist, neg_dist, store.margin)
        tape.backward(loss)
        grads = {}
        for name in store.trainable_names():
            g = getattr(m, name).grad
            grads[name] = g if g is not None else np.zeros_like(store.arrays[name])
        return float(ad.values_of(loss)), grads

    bounds = _shard_bounds(size, threads)
    if len(bounds) == 1:
        return run_shard(0, size)

    total_loss = 0.0
    total_grads = _zero_moments(store)

    def accumulate(result: tuple[float, dict[str, np.ndarray]], weight: float) -> None:
        nonlocal total_loss
        loss, grads = result
        total_loss += weight * loss
        for name, g in grads.items():
            total_grads[name] += weight * g

    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        futures = [pool.submit(run_shard, lo, hi) for lo, hi in bounds]
        if deterministic:
            for fut, (lo, hi) in zip(futures, bounds):
                accumulate(fut.result(), (hi - lo) / size)
        else:
            weights = {fut: (hi - lo) / size for fut, (lo, hi) in zip(futures, bounds)}
            pending = set(futures)
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    accumulate(fut.result(), weights[fut])
    return total_loss, total_grads


# ---------------------------------------------------------------------------
# the training loop
# ---------------------------------------------------------------------------

class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite mid-run."""


_EMA = 0.05  # weight of the newest batch in the running-loss averages


def train(instances, n_entities: int, n_relations: int, cfg: TrainingConfig, *,
          valid_instances=None, out_dir: str | None = None,
          state: TrainState | None = None,
          entity_names: list[str] | None = None,
          relation_names: list[str] | None = None,
          log_every: int = 50) -> tuple[TrainState, list[dict]]:
    """Run the loop until ``cfg.steps`` (or early stopping) and return the
    final state plus a metrics log.

    Pass ``state`` to resume from a checkpoint.  With ``out_dir`` set, the
    newest state is written to ``last.ckpt`` every ``cfg.checkpoint_every``
    steps (and at the end); when ``valid_instances`` are given, validation
    MRR is computed every ``cfg.eval_every`` steps, the best state is kept in
    ``best.ckpt``, and the run stops after ``cfg.patience`` evaluations
    without improvement.
    """
    usable = [q for q in instances if q.easy or q.hard]
    if not usable:
        raise ValueError("no trainable instances (all lack answers)")
    groups: dict[str, list[QueryInstance]] = {}
    for q in usable:
        groups.setdefault(q.structure, []).append(q)
    tags = sorted(groups)

    if state is None:
        state = init_state(cfg, n_entities, n_relations,
                           entity_names=entity_names, relation_names=relation_names)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    log: list[dict] = []
    best_valid = -math.inf
    evals_since_best = 0
    rng = state.rng

    while state.step < cfg.steps:
        tag = tags[int(rng.integers(len(tags)))]
        pool = groups[tag]
        batch = [pool[int(i)] for i in rng.integers(len(pool), size=cfg.b)]
        anchors = np.array([q.anchors for q in batch], dtype=np.int64)
        rels = np.array([q.relations for q in batch], dtype=np.int64)
        positives = np.empty(len(batch), dtype=np.int64)
        negatives = np.empty((len(batch), cfg.n), dtype=np.int64)
        for i, q in enumerate(batch):
            answers = q.easy if q.easy else q.hard
            positives[i] = answers[int(rng.integers(len(answers)))]
            negatives[i] = sample_negatives(q, cfg.n, rng, n_entities)

        loss, grads = batch_loss_and_grads(
            state.store, tag, anchors, rels, positives, negatives, lam=cfg.lam,
            threads=cfg.threads, deterministic=cfg.deterministic or cfg.threads == 1,
        )
        if not math.isfinite(loss):
            raise TrainingDiverged(
                f"loss became {loss} at step {state.step + 1} on structure {tag!r};"
                " reduce lr or inspect the dataset"
            )
        state.step += 1
        adam_step(state.store, grads, state.adam_m, state.adam_v, state.step, cfg.lr)
        state.running_loss = (
            loss if math.isnan(state.running_loss)
            else (1.0 - _EMA) * state.running_loss + _EMA * loss
        )
        prev = state.per_structure.get(tag)
        state.per_structure[tag] = loss if prev is None else (1.0 - _EMA) * prev + _EMA * loss

        if state.step == 1 or state.step % log_every == 0 or state.step == cfg.steps:
            log.append({"event": "train", "step": state.step, "structure": tag,
                        "loss": loss, "running_loss": state.running_loss})
        if out_dir and state.step % cfg.checkpoint_every == 0:
            save_checkpoint(os.path.join(out_dir, "last.ckpt"), state)

        if valid_instances and state.step % cfg.eval_every == 0:
            from .evaluation import evaluate_instances

            report = evaluate_instances(state.store, valid_instances, lam=cfg.lam,
                                        threads=cfg.threads)
            log.append({"event": "valid", "step": state.step,
                        "mrr": report.average_mrr})
            if report.average_mrr > best_valid:
                best_valid = report.average_mrr
                evals_since_best = 0
                if out_dir:
                    save_checkpoint(os.path.join(out_dir, "best.ckpt"), state)
            else:
                evals_since_best += 1
                if evals_since_best >= cfg.patience:
                    log.append({"event": "early_stop", "step": state.step,
                                "best_valid_mrr": best_valid})
                    break

    if out_dir:
        save_checkpoint(os.path.join(out_dir, "last.ckpt"), state)
    return state, log


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = "conequery-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, state: TrainState) -> None:
    """Write the full train state; the write is atomic (tmp file + rename)."""
    meta = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "n_entities": state.store.n_entities,
        "n_relations": state.store.n_relations,
        "d": state.store.d,
        "rotation_mode": state.store.rotation_mode,
        "step": state.step,
        "running_loss": state.running_loss,
        "per_structure": state.per_structure,
        "config": asdict(state.config),
        "rng_state": state.rng.bit_generator.state,
        "entity_names": state.entity_names,
        "relation_names": state.relation_names,
    }
    payload: dict[str, np.ndarray] = {
        "__meta__": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    }
    for name, arr in state.store.arrays.items():
        payload["param." + name] = arr
    for name, arr in state.adam_m.items():
        payload["adam_m." + name] = arr
    for name, arr in state.adam_v.items():
        payload["adam_v." + name] = arr
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> TrainState:
    """Restore a checkpoint bit-identically (arrays, rng stream, counters)."""
    with np.load(path) as npz:
        if "__meta__" not in npz.files:
            raise ValueError(f"{path}: not a checkpoint (missing metadata entry)")
        meta = json.loads(npz["__meta__"].tobytes().decode("utf-8"))
        if meta.get("magic") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC} file")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint version {meta.get('version')!r}"
            )
        cfg = TrainingConfig(**meta["config"])
        store = ParameterStore(meta["n_entities"], meta["n_relations"], meta["d"],
                               seed=0, rotation_mode=meta["rotation_mode"])
        expected = {"param." + name for name in store.arrays}
        present = {key for key in npz.files if key.startswith("param.")}
        if expected != present:
            raise ValueError(f"{path}: parameter arrays do not match this model layout")
        for name in store.arrays:
            loaded = npz["param." + name]
            if loaded.shape != store.arrays[name].shape:
                raise ValueError(f"{path}: bad shape for {name}: {loaded.shape}")
            store.arrays[name] = loaded.astype(np.float64, copy=False)
        adam_m = {n: npz["adam_m." + n].astype(np.float64, copy=False)
                  for n in store.trainable_names()}
        adam_v = {n: npz["adam_v." + n].astype(np.float64, copy=False)
                  for n in store.trainable_names()}
    rng = np.random.default_rng(0)
    rng.bit_generator.state = meta["rng_state"]
    return TrainState(
        store=store, adam_m=adam_m, adam_v=adam_v, step=int(meta["step"]),
        rng=rng, running_loss=float(meta["running_loss"]),
        per_structure=dict(meta["per_structure"]), config=cfg,
        entity_names=meta["entity_names"], relation_names=meta["relation_names"],
    )


# ---------------------------------------------------------------------------
# multi-seed spread
# ---------------------------------------------------------------------------

@dataclass
class MultiSeedReport:
    """Per-metric mean and sample standard deviation across seeds."""

    metrics: dict[str, tuple[float, float]]
    per_seed: list[dict[str, float]] = field(default_factory=list)


def seed_spread(values) -> tuple[float, float]:
    """Mean and sample standard deviation (ddof=1) of a metric across seeds."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("no values")
    mean = float(np.mean(vals))
    std = float(np.std(vals, ddof=1)) if len(vals) >= 2 else 0.0
    return mean, std


def multi_seed(train_instances, test_instances, n_entities: int, n_relations: int,
               cfg: TrainingConfig, n_seeds: int, *,
               valid_instances=None) -> MultiSeedReport:
    """Train with seeds cfg.seed .. cfg.seed+n_seeds-1 and report the spread
    of test MRR per structure (plus the AVG row)."""
    if n_seeds < 2:
        raise ValueError("need at least two seeds to report a spread")
    from .evaluation import evaluate_instances

    rows: list[dict[str, float]] = []
    for i in range(n_seeds):
        cfg_i = replace(cfg, seed=cfg.seed + i)
        state, _ = train(train_instances, n_entities, n_relations, cfg_i,
                         valid_instances=valid_instances)
        report = evaluate_instances(state.store, test_instances, lam=cfg_i.lam,
                                    threads=cfg_i.threads)
        row = {tag: metrics.mrr for tag, metrics in report.per_structure.items()}
        row["AVG"] = report.average_mrr
        rows.append(row)
    names = sorted({name for row in rows for name in row})
    metrics = {name: seed_spread([row[name] for row in rows if name in row])
               for name in names}
    return MultiSeedReport(metrics=metrics, per_seed=rows)


# ---------------------------------------------------------------------------
# full-loss gradient audit
# ---------------------------------------------------------------------------

def _random_graph(rng: np.random.Generator, n_entities: int, n_relations: int,
                  n_triples: int) -> KnowledgeGraph:
    triples: set[tuple[int, int, int]] = set()
    while len(triples) < n_triples:
        triples.add((int(rng.integers(n_entities)), int(rng.integers(n_relations)),
                     int(rng.integers(n_entities))))
    return KnowledgeGraph(sorted(triples), n_entities, n_relations)


def gradient_check_model(n_instances: int = 20, d: int = 8, seed: int = 0, *,
                         n_entities: int = 30, n_relations: int = 4,
                         n_triples: int = 150, k_negatives: int = 3,
                         lam: float = 0.02, margin: float = 2.0,
                         step: float = 1e-5, zero_floor: float = 1e-5) -> float:
    """Max relative error between analytic and finite-difference gradients of
    the complete loss, cycling through all query structures so projection,
    intersection, negation, union and DNF paths are all exercised.

    Every parameter coordinate that can influence the loss is probed:
    embedding-table rows the instance never touches are skipped (their
    gradient is identically zero on both sides), kink coordinates are
    validated by subgradient containment, and coordinates below the
    finite-difference resolution (both readings under ``zero_floor``, far
    beneath any gradient this loss produces) count as agreeing zeros (see
    ``autodiff.grad_check`` for why both are necessary).
    """
    rng = np.random.default_rng(seed)
    graph = _random_graph(rng, n_entities, n_relations, n_triples)
    worst = 0.0
    checked = 0
    attempts = 0
    while checked < n_instances:
        tag = ALL_STRUCTURES[checked % len(ALL_STRUCTURES)]
        instance = sample_instance(rng, tag, graph)
        attempts += 1
        if instance is None:
            if attempts > 50 * n_instances:
                raise RuntimeError("could not sample enough toy instances")
            continue
        store = ParameterStore(n_entities, n_relations, d, seed=seed + 101 + checked,
                               margin=margin)
        names = store.trainable_names()
        answers = instance.easy if instance.easy else instance.hard
        pos = np.array([answers[int(rng.integers(len(answers)))]], dtype=np.int64)
        neg = sample_negatives(instance, k_negatives, rng, n_entities).reshape(1, -1)
        anchors = np.array([instance.anchors], dtype=np.int64)
        rels = np.array([instance.relations], dtype=np.int64)

        def f(*leaves):
            m = ModelParams(d=d, rotation_mode=store.rotation_mode,
                            **dict(zip(names, leaves)))
            disjuncts = embed_structure(m, tag, anchors, rels)
            pos_dist = dnf_entity_distance(disjuncts, entity_points(m, pos), lam)
            wide = [ConeBatch(ad.reshape(c.axis, (1, 1, d)),
                              ad.reshape(c.aperture, (1, 1, d)))
                    for c in disjuncts]
            neg_dist = dnf_entity_distance(wide, entity_points(m, neg), lam)
            return margin_loss(pos_dist, neg_dist, margin)

        # Only entity rows the instance references can influence the loss.
        rows = np.unique(np.concatenate([anchors.ravel(), pos, neg.ravel()]))
        entity_coords = (rows[:, None] * d + np.arange(d)).ravel()
        coords = [entity_coords if name == "entity_axis" else None for name in names]
        worst = max(worst, ad.grad_check(f, [store.arrays[n] for n in names],
                                         step=step, coords=coords,
                                         subgradient=True, zero_floor=zero_floor))
        checked += 1
    return worst
