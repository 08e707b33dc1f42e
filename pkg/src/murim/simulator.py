"""Round-synchronous federated simulation with reputation, SLE and payments.

Per round:

1. active clients train locally from the current global model;
2. attackers transform their updates;
3. each client privatizes its update with its own true epsilon;
4. the server observes latencies, builds the global direction and scores
   every received update;
5. the resource and privacy channels classify and update opinions;
6. clients whose reliability falls below the threshold are dropped;
7. the surviving updates are aggregated (SLE or FedAvg);
8. payments are computed.

Steps 1-3 and the latency draw are independent per client; everything on
the server side runs after all client results are in.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import rng as keys
from .attacks import NONE as ATTACK_NONE, apply_attack
from .config import FEDAVG, RunConfig
from .contribution import global_direction, score
from .dp import PrivacyParams, privatize
from .errors import ConfigError
from .incentive import pay_round
from .latency import ResourceProfile, expected_latency, infer_resources, observe_latency
from .model import (
    Dataset,
    evaluate,
    init_params,
    load_csv,
    load_idx,
    make_synthetic,
    minmax_apply,
    minmax_ranges,
    param_dim,
    partition,
    split_holdout,
    train_local,
)
from .reputation import (
    Indicator,
    ReliabilityState,
    apply_threshold,
    classify_privacy_round,
    classify_resource,
    observe,
)
from .sle import sle_aggregate

log = logging.getLogger(__name__)

HONEST = "honest"
RESOURCE_LIAR = "resource_liar"
PRIVACY_LIAR = "privacy_liar"
ATTACKER = "attacker"
LIAR_ROLES = (RESOURCE_LIAR, PRIVACY_LIAR)

HOLDOUT_FRACTIONS = (0.8, 0.1, 0.1)


@dataclass
class ClientProfile:
    client_id: int
    role: str
    resources: ResourceProfile
    epsilon: float
    shard: Dataset

    @property
    def is_liar(self) -> bool:
        return self.role in LIAR_ROLES


@dataclass
class RoundRecord:
    round: int
    client_id: int
    role: str
    contribution: float
    cosine: float
    observed_latency: float
    expected_latency: float
    r_reported: float
    r_inferred: float
    resource_indicator: str
    privacy_indicator: str
    p_resources: float
    p_privacy: float
    p_reliability: float
    dropped: bool
    incentive: float = 0.0
    utility: float = 0.0


@dataclass
class RunSummary:
    seed: int
    num_clients: int
    rounds_completed: int
    test_acc: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    liars_injected: int = 0
    attackers_injected: int = 0
    innocent_drops: int = 0
    liars_survived: int = 0
    attacker_drops: int = 0
    total_dropouts: int = 0
    mean_utility_reliable: float = math.nan
    mean_utility_unreliable: float = math.nan
    delta_acc: float | None = None
    terminated_early: bool = False

    @property
    def final_test(self) -> float:
        return self.test_acc[-1]

    @property
    def final_train(self) -> float:
        return self.train_acc[-1]

    @property
    def final_val(self) -> float:
        return self.val_acc[-1]


@dataclass
class RunResult:
    config: RunConfig
    summary: RunSummary
    records: list[RoundRecord]
    model: np.ndarray
    clients: list[ClientProfile]


# --------------------------------------------------------------------------
# setup


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def load_data(config: RunConfig) -> tuple[Dataset, Dataset, Dataset]:
    """Build the train/val/test splits for a run.

    File sources are min-max scaled with ranges fitted on the training
    split only.
    """
    dc = config.data
    if dc.source == "synthetic":
        total = _round_half_up(config.num_clients * dc.samples_per_client / HOLDOUT_FRACTIONS[0])
        per_class = -(-total // dc.num_classes)
        data = make_synthetic(
            dc.num_classes,
            dc.num_features,
            per_class,
            dc.separation,
            keys.derive_seed(config.seed, keys.DATA),
        )
        train, val, test = split_holdout(data, HOLDOUT_FRACTIONS, keys.derive_seed(config.seed, keys.SPLIT))
        return train, val, test

    if dc.source == "csv":
        schema = {"numeric": list(dc.numeric), "categorical": {k: list(v) for k, v in dc.categorical.items()}}
        if dc.label_levels is not None:
            schema["label_levels"] = list(dc.label_levels)
        data = load_csv(dc.csv_path, dc.label_column, schema, scale=False)
    else:
        data = load_idx(dc.idx_images, dc.idx_labels)
    if dc.max_samples is not None and len(data) > dc.max_samples:
        pick = np.random.default_rng(keys.derive_seed(config.seed, keys.DATA)).permutation(len(data))
        data = data.subset(np.sort(pick[: dc.max_samples]))
    train, val, test = split_holdout(data, HOLDOUT_FRACTIONS, keys.derive_seed(config.seed, keys.SPLIT))
    lo, hi = minmax_ranges(train.features)
    return tuple(
        Dataset(minmax_apply(d.features, lo, hi), d.labels, d.num_classes) for d in (train, val, test)
    )


def build_clients(config: RunConfig, train: Dataset) -> list[ClientProfile]:
    """Partition the data and draw every client's hidden truth.

    All per-client random vectors are drawn for the whole population before
    roles are applied, so a run with attacks disabled sees exactly the same
    draws as its attacked twin.
    """
    n = config.num_clients
    split = partition(
        train,
        n,
        config.data.mode,
        config.data.dirichlet_alpha,
        keys.derive_seed(config.seed, keys.PARTITION),
    )
    rng = keys.stream(config.seed, keys.POPULATION)
    order = rng.permutation(n)
    capacity = rng.uniform(config.resources.capacity_min, config.resources.capacity_max, n)
    overhead = rng.uniform(config.resources.overhead_min, config.resources.overhead_max, n)
    eps_honest = rng.uniform(config.privacy.eps_min, config.privacy.eps_max, n)
    eps_liar = rng.uniform(config.privacy.eps_min / 4, config.privacy.eps_min / 2, n)

    n_liars = _round_half_up(config.liar_fraction * n)
    n_resource = _round_half_up(n_liars * config.resource_liar_share)
    n_attack = 0 if config.attack.kind == ATTACK_NONE else _round_half_up(config.attack.attacker_fraction * n)
    if n_liars + n_attack > n:
        raise ConfigError("not enough clients for the requested liars and attackers", key="num_clients")
    roles = np.full(n, HONEST, dtype=object)
    roles[order[:n_resource]] = RESOURCE_LIAR
    roles[order[n_resource:n_liars]] = PRIVACY_LIAR
    roles[order[n_liars : n_liars + n_attack]] = ATTACKER

    dim = param_dim(train.num_features, train.num_classes)
    clients = []
    for i in range(n):
        shard = split.shards[i]
        reported = capacity[i] * (config.resources.liar_overreport if roles[i] == RESOURCE_LIAR else 1.0)
        profile = ResourceProfile(
            rho=float(config.training.epochs * len(shard) * dim),
            lambda_overhead=float(overhead[i]),
            r_true=float(capacity[i]),
            r_reported=float(reported),
        )
        eps = eps_liar[i] if roles[i] == PRIVACY_LIAR else eps_honest[i]
        clients.append(ClientProfile(i, str(roles[i]), profile, float(eps), shard))
    return clients


# --------------------------------------------------------------------------
# one round


@dataclass
class Upload:
    update: np.ndarray
    latency: float


def client_step(client: ClientProfile, global_model: np.ndarray, config: RunConfig, round_idx: int) -> Upload:
    """Client-side work for one round: train, attack, privatize, and the latency draw."""
    seed, cid = config.seed, client.client_id
    local = train_local(
        global_model,
        client.shard,
        config.training.epochs,
        config.training.lr,
        keys.derive_seed(seed, keys.TRAIN, round_idx, cid),
        config.training.batch_size,
    )
    update = local - global_model
    attacker = client.role == ATTACKER
    if attacker:
        update = apply_attack(update, config.attack, keys.stream(seed, keys.ATTACK, round_idx, cid))
    params = PrivacyParams(client.epsilon, config.privacy.delta, config.privacy.clip_norm)
    noisy = privatize(
        update,
        params,
        keys.stream(seed, keys.DP_NOISE, round_idx, cid),
        epsilon_cap=config.privacy.epsilon_cap,
        clip_first=not attacker,
    )
    latency = observe_latency(
        client.resources, config.resources.jitter_cv, keys.stream(seed, keys.LATENCY, round_idx, cid)
    )
    return Upload(noisy, latency)


def _aggregate(config: RunConfig, updates: list[np.ndarray], sizes: list[int]) -> np.ndarray:
    if config.aggregator == FEDAVG:
        w = np.asarray(sizes, dtype=np.float64)
        return (w / w.sum()) @ np.asarray(updates)
    return sle_aggregate(updates, config.sle)


# --------------------------------------------------------------------------
# run


def run(config: RunConfig) -> RunResult:
    """Execute ``config.rounds`` synchronous rounds; deterministic per seed."""
    train, val, test = load_data(config)
    clients = build_clients(config, train)
    for c in clients:
        if c.epsilon > config.privacy.eps_max:
            log.warning("client %d epsilon %.3g above eps_max (not penalized)", c.client_id, c.epsilon)

    model = init_params(train.num_features, train.num_classes)
    states = [ReliabilityState() for _ in clients]
    # auto-calibrated normalizer: the largest capacity claim seen in the first round
    omega = config.incentive.omega
    if omega is None:
        omega = max(c.resources.r_reported for c in clients)
    pay_params = replace(config.incentive, omega=omega)

    summary = RunSummary(seed=config.seed, num_clients=config.num_clients, rounds_completed=0)
    summary.test_acc.append(evaluate(model, test))
    summary.train_acc.append(evaluate(model, train))
    summary.val_acc.append(evaluate(model, val))
    records: list[RoundRecord] = []

    for t in range(config.rounds):
        active = [c for c, s in zip(clients, states) if not s.dropped]
        if not active:
            summary.terminated_early = True
            log.warning("all clients dropped before round %d; stopping", t)
            break

        uploads = [client_step(c, model, config, t) for c in active]

        updates = [u.update for u in uploads]
        v = global_direction(updates)
        scores = [score(g, v) for g in updates]
        privacy_ind = classify_privacy_round([s.value for s in scores], config.reputation)

        round_records = []
        for c, up, sc, p_ind in zip(active, uploads, scores, privacy_ind):
            state = states[c.client_id]
            r_inf = infer_resources(up.latency, c.resources)
            r_ind = classify_resource(r_inf, c.resources.r_reported, config.reputation)
            observe(state, r_ind, p_ind)
            if config.reputation_enabled:
                apply_threshold(state, t, config.reputation)
            round_records.append(
                RoundRecord(
                    round=t,
                    client_id=c.client_id,
                    role=c.role,
                    contribution=sc.value,
                    cosine=sc.cosine,
                    observed_latency=up.latency,
                    expected_latency=expected_latency(c.resources),
                    r_reported=c.resources.r_reported,
                    r_inferred=r_inf,
                    resource_indicator=r_ind.value,
                    privacy_indicator=p_ind.value,
                    p_resources=state.p_resources,
                    p_privacy=state.p_privacy,
                    p_reliability=state.p_reliability,
                    dropped=state.dropped,
                )
            )

        keep = [k for k, c in enumerate(active) if not states[c.client_id].dropped]
        if keep:
            delta = _aggregate(
                config, [updates[k] for k in keep], [len(active[k].shard) for k in keep]
            )
            model = model + delta

        for rec, pay in zip(round_records, pay_round(round_records, pay_params)):
            rec.incentive = pay.incentive
            rec.utility = pay.utility
        records.extend(round_records)

        summary.rounds_completed = t + 1
        summary.test_acc.append(evaluate(model, test))
        summary.train_acc.append(evaluate(model, train))
        summary.val_acc.append(evaluate(model, val))

    _tally(summary, clients, states, records)
    return RunResult(config, summary, records, model, clients)


def _tally(summary: RunSummary, clients, states, records) -> None:
    dropped = [s.dropped for s in states]
    summary.liars_injected = sum(c.is_liar for c in clients)
    summary.attackers_injected = sum(c.role == ATTACKER for c in clients)
    summary.innocent_drops = sum(d for c, d in zip(clients, dropped) if c.role == HONEST)
    summary.liars_survived = sum(not d for c, d in zip(clients, dropped) if c.is_liar)
    summary.attacker_drops = sum(d for c, d in zip(clients, dropped) if c.role == ATTACKER)
    summary.total_dropouts = sum(dropped)
    # run-averaged utility per client: rounds after a drop count as zero
    total = np.zeros(len(clients))
    for r in records:
        total[r.client_id] += r.utility
    per_round = total / max(summary.rounds_completed, 1)
    honest = [per_round[c.client_id] for c in clients if c.role == HONEST]
    liars = [per_round[c.client_id] for c in clients if c.is_liar]
    summary.mean_utility_reliable = float(np.mean(honest)) if honest else math.nan
    summary.mean_utility_unreliable = float(np.mean(liars)) if liars else math.nan


# --------------------------------------------------------------------------
# experiment drivers


@dataclass
class SweepEntry:
    config: RunConfig
    result: RunResult | None
    error: str | None = None


def _run_entry(config: RunConfig) -> SweepEntry:
    try:
        return SweepEntry(config, run(config))
    except Exception as exc:  # one failing config must not abort the sweep
        log.error("run failed (seed %d): %s", config.seed, exc)
        return SweepEntry(config, None, f"{type(exc).__name__}: {exc}")


def sweep(configs: Sequence[RunConfig], jobs: int = 1) -> list[SweepEntry]:
    """Run every config; failures are recorded per entry and the rest continue.

    Results come back in input order regardless of ``jobs``.
    """
    if not configs:
        raise ConfigError("sweep needs at least one config")
    if jobs == 0:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(configs) == 1:
        return [_run_entry(c) for c in configs]
    with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
        return list(pool.map(_run_entry, configs))


def clean_twin(config: RunConfig) -> RunConfig:
    return replace(config, attack=replace(config.attack, kind=ATTACK_NONE))


def attack_pair(config: RunConfig, jobs: int = 1) -> tuple[RunResult, RunResult]:
    """Run the clean twin and the attacked config; both share every random draw."""
    entries = sweep([clean_twin(config), config], jobs=jobs)
    for e in entries:
        if e.error is not None:
            raise RuntimeError(e.error)
    clean, attacked = entries[0].result, entries[1].result
    attacked.summary.delta_acc = clean.summary.final_test - attacked.summary.final_test
    return clean, attacked


def attack_experiment(config: RunConfig) -> float:
    """Final-round test accuracy lost to the attack: ``acc_clean - acc_attacked``."""
    _, attacked = attack_pair(config)
    return attacked.summary.delta_acc
