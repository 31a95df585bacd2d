"""The federated round loop and time/cost-to-accuracy metrics."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path


from . import clp as clp_mod
from .config import ExperimentConfig, to_dict
from .cost import CostModel, assign_costs, load_traces, round_emissions
from .errors import FLError, SelectionError
from .model import ModelParams, evaluate, fed_avg, init_params, local_train
from .partition import (
    LabeledDataset,
    PartitionSpec,
    generate_synthetic,
    load_csv_dataset,
    partition_non_iid,
    train_test_split,
)
from .seeding import sub_seed
from .selection import ClientStats, select, utility

logger = logging.getLogger(__name__)


@dataclass
class RoundRecord:
    round: int
    k_requested: int
    participants: list
    accuracy: float
    loss: float
    emissions: float
    cumulative_emissions: float
    clp_active: bool
    duration_s: float = 0.0

    def log_entry(self) -> dict:
        # wall-clock time is kept out of the run log so logs are reproducible byte for byte
        return {
            "round": self.round,
            "k_requested": self.k_requested,
            "participants": self.participants,
            "accuracy": self.accuracy,
            "loss": self.loss,
            "emissions": self.emissions,
            "cumulative_emissions": self.cumulative_emissions,
            "clp_active": self.clp_active,
        }


@dataclass
class ExperimentResult:
    records: list
    final_params: ModelParams
    stop_reason: str
    selection_log: list = field(default_factory=list)
    clp_event: dict | None = None
    rounds_to_target: int | None = None
    cost_to_target: float | None = None

    @property
    def accuracies(self) -> list[float]:
        return [r.accuracy for r in self.records]

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].accuracy if self.records else 0.0

    @property
    def total_emissions(self) -> float:
        return self.records[-1].cumulative_emissions if self.records else 0.0


@dataclass
class Setup:
    """Everything a run needs that does not depend on the selection policy."""

    train: LabeledDataset
    test: LabeledDataset
    shards: list
    cost_model: CostModel


def _seed(explicit, master: int, purpose: str) -> int:
    return int(explicit) if explicit is not None else sub_seed(master, purpose)


def build_setup(cfg: ExperimentConfig) -> Setup:
    d = cfg.data
    if d.source == "synthetic":
        data = generate_synthetic(
            d.num_samples, d.num_classes, d.feature_dim, d.class_separation, _seed(d.seed, cfg.seed, "data")
        )
    else:
        data = load_csv_dataset(d.path, header=d.header)
    train, test = train_test_split(data, d.test_fraction, _seed(d.seed, cfg.seed, "split"))
    p = cfg.partition
    spec = PartitionSpec(p.num_clients, p.knob, _seed(p.seed, cfg.seed, "partition"), p.allow_empty)
    shards = partition_non_iid(train, spec)
    traces = load_traces(cfg.cost.traces)
    costs = assign_costs(p.num_clients, traces, _seed(cfg.cost.seed, cfg.seed, "costs"), cfg.cost.energy_per_round)
    if cfg.cost.scale != 1.0:
        costs = costs.scaled(cfg.cost.scale)
    return Setup(train, test, shards, costs)


def _converged_at(accs, r: int, min_delta: float, patience: int) -> bool:
    """Window rule at 1-based round ``r``: best of the last ``patience`` rounds barely beats the earlier best."""
    if r - patience < 1:
        return False
    before = max(accs[: r - patience])
    recent = max(accs[r - patience : r])
    return recent - before < min_delta


def _accuracies(result_or_curve) -> list[float]:
    if isinstance(result_or_curve, ExperimentResult):
        return result_or_curve.accuracies
    return [float(a) for a in result_or_curve]


def convergence_round(result, min_delta: float, patience: int) -> int:
    """First round whose trailing ``patience`` window improves the best accuracy by < ``min_delta``.

    Returns the last round when the curve never converges.
    """
    if patience < 1:
        raise ValueError("patience must be >= 1")
    accs = _accuracies(result)
    for r in range(1, len(accs) + 1):
        if _converged_at(accs, r, min_delta, patience):
            return r
    return len(accs)


def convergence_accuracy(result, min_delta: float, patience: int) -> float:
    """Accuracy at the convergence round; the default target for comparing policies."""
    accs = _accuracies(result)
    return accs[convergence_round(accs, min_delta, patience) - 1]


def rounds_to_accuracy(result, target: float) -> int | None:
    for i, a in enumerate(_accuracies(result), start=1):
        if a >= target:
            return i
    return None


def cost_to_accuracy(result: ExperimentResult, target: float) -> float | None:
    r = rounds_to_accuracy(result, target)
    return None if r is None else result.records[r - 1].cumulative_emissions


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, setup: Setup | None = None) -> ExperimentResult:
    """Run rounds until the stopping rule, ``max_rounds``, or an exhausted client pool.

    ``jobs`` only sets how many local trainings run concurrently; results do not depend on it.
    """
    setup = setup or build_setup(cfg)
    train, test, cost_model = setup.train, setup.test, setup.cost_model
    shards = {s.client_id: s for s in setup.shards}
    pool = [
        ClientStats(s.client_id, cost_model.cost(s.client_id), s.size)
        for s in setup.shards
        if s.size > 0  # empty shards (only when allowed) never participate
    ]
    stats = {c.client_id: c for c in pool}
    n_pool = len(pool)

    hyper = cfg.model
    params = init_params(hyper.model_kind, train.feature_dim, train.num_classes, sub_seed(cfg.seed, "init"), hyper.hidden_units)
    sel_cfg = cfg.selection
    sel_seed = _seed(sel_cfg.seed, cfg.seed, "selection")
    cap = sel_cfg.cap(cfg.max_rounds)
    fixed_k = max(1, clp_mod.round_half_up(sel_cfg.k_fraction * n_pool))
    ctrl = clp_mod.ClpController(cfg.clp, n_pool) if sel_cfg.policy == "clp_utility_cost" else None
    stop = cfg.stopping

    records: list[RoundRecord] = []
    sel_log: list[dict] = []
    accs: list[float] = []
    cumulative = 0.0
    stop_reason = "max_rounds"
    executor = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for r in range(1, cfg.max_rounds + 1):
            t0 = time.perf_counter()
            clp_active = ctrl.active if ctrl else False
            k = ctrl.next_count(r) if ctrl else fixed_k
            try:
                chosen = select(sel_cfg, pool, k, cap, sel_seed, r)
            except SelectionError as exc:
                logger.info("round %d: %s", r, exc)
                stop_reason = "pool_exhausted"
                break
            sel_log.append(
                {
                    "round": r,
                    "policy": sel_cfg.policy,
                    "k": k,
                    "participants": [
                        {
                            "client_id": cid,
                            "utility": stats[cid].last_utility,
                            "cost": stats[cid].cost,
                            "score": stats[cid].score,
                            "times_selected": stats[cid].times_selected,
                        }
                        for cid in chosen
                    ],
                }
            )

            def train_one(cid, _params=params, _r=r):
                return local_train(_params, shards[cid], train, hyper, sub_seed(cfg.seed, "train", _r, cid), _r)

            if executor is None:
                results = [train_one(cid) for cid in chosen]
            else:
                results = list(executor.map(train_one, chosen))
            params = fed_avg(params, results)
            acc, loss = evaluate(params, test)
            accs.append(acc)
            if ctrl is not None and ctrl.observe(accs, r):
                logger.info("round %d: critical learning period ended (mu=%.5f)", r, ctrl.mu_at_end)
            for res in results:
                st = stats[res.client_id]
                st.last_utility = utility(res.per_sample_losses, res.num_samples)
                st.times_selected += 1
            emitted = round_emissions(chosen, cost_model)
            cumulative += emitted
            records.append(
                RoundRecord(r, k, list(chosen), acc, loss, emitted, cumulative, clp_active, time.perf_counter() - t0)
            )
            if stop.rule == "threshold" and acc >= stop.target_accuracy:
                stop_reason = "threshold"
                break
            if stop.rule == "convergence" and _converged_at(accs, r, stop.min_delta, stop.patience):
                stop_reason = "converged"
                break
    except FLError as exc:
        if getattr(exc, "round_idx", None) is None:
            exc.round_idx = len(records) + 1
        raise
    finally:
        if executor is not None:
            executor.shutdown()

    result = ExperimentResult(records, params, stop_reason, sel_log, ctrl.event() if ctrl else None)
    if stop.target_accuracy is not None:
        result.rounds_to_target = rounds_to_accuracy(result, stop.target_accuracy)
        result.cost_to_target = cost_to_accuracy(result, stop.target_accuracy)
    return result


def summarize(cfg: ExperimentConfig, result: ExperimentResult, targets=None) -> dict:
    targets = list(cfg.targets if targets is None else targets)
    if cfg.stopping.target_accuracy is not None and cfg.stopping.target_accuracy not in targets:
        targets.append(cfg.stopping.target_accuracy)
    return {
        "policy": cfg.selection.policy,
        "knob": cfg.partition.knob,
        "seed": cfg.seed,
        "stop_reason": result.stop_reason,
        "rounds": len(result.records),
        "final_accuracy": result.final_accuracy,
        "best_accuracy": max(result.accuracies, default=0.0),
        "total_emissions": result.total_emissions,
        "convergence_round": convergence_round(result, cfg.stopping.min_delta, cfg.stopping.patience)
        if result.records
        else None,
        "clp_event": result.clp_event,
        "targets": [
            {
                "target": t,
                "rounds_to_target": rounds_to_accuracy(result, t),
                "cost_to_target": cost_to_accuracy(result, t),
            }
            for t in targets
        ],
    }


def _jsonl(rows) -> str:
    return "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult, out_dir, targets=None) -> dict:
    """Write run log, selection log, summary, resolved config and timings under ``out_dir``."""
    import yaml

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_log.jsonl").write_text(_jsonl(r.log_entry() for r in result.records))
    (out / "selection_log.jsonl").write_text(_jsonl(result.selection_log))
    summary = summarize(cfg, result, targets)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "resolved_config.yaml").write_text(yaml.safe_dump(to_dict(cfg), sort_keys=False))
    (out / "timings.json").write_text(json.dumps([r.duration_s for r in result.records]) + "\n")
    return summary


def compare_policies(
    cfg: ExperimentConfig,
    policies,
    target: float | None = None,
    jobs: int = 1,
    runs: dict | None = None,
) -> dict:
    """Two-phase comparison against random selection on identical data, partition and costs.

    Random runs first; unless ``target`` is given, its convergence accuracy
    becomes the target every policy is measured against.
    """
    setup = build_setup(cfg)
    runs = {} if runs is None else runs
    policies = list(policies)
    order = ["random"] + [p for p in policies if p != "random"]
    for p in order:
        if p not in runs:
            runs[p] = run_experiment(cfg.with_policy(p), jobs=jobs, setup=setup)
    if target is None:
        target = convergence_accuracy(runs["random"], cfg.stopping.min_delta, cfg.stopping.patience)
    base_cost = cost_to_accuracy(runs["random"], target)
    rows = {}
    for p in order:
        res = runs[p]
        cost = cost_to_accuracy(res, target)
        rows[p] = {
            "policy": p,
            "final_accuracy": res.final_accuracy,
            "rounds_to_target": rounds_to_accuracy(res, target),
            "cost_to_target": cost,
            "normalized_cost": None if cost is None or not base_cost else 100.0 * (cost / base_cost),
            "total_emissions": res.total_emissions,
            "stop_reason": res.stop_reason,
        }
    return {"target": target, "rows": rows, "runs": runs}
