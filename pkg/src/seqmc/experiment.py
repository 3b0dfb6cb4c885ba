"""Multi-chain experiment driver and cross-chain reporting."""

from __future__ import annotations

import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_hash
from .energy import Scorer, load_tabular, tabular_model_generate
from .errors import StateSpaceTooLarge
from .oracle import (MAX_KERNEL_STATES, SamplerSpec, detailed_balance_residual,
                     enumerate_target, stationary_distribution, total_variation,
                     transition_kernel)
from .sampler import ChainResult, run_chain
from .trace import Trace, export_trace


@dataclass
class Report:
    """Per-chain results plus cross-chain statistics and oracle checks."""

    config_hash: str
    chains: list[ChainResult]
    acceptance_rates: list[float]
    novel_rates: list[float]
    acceptance_mean: float
    acceptance_std: float
    novel_mean: float
    novel_std: float
    epoch_mean_energies: dict[int, float]
    epoch_std_energies: dict[int, float]
    oracle: dict | None

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "acceptance_rates": self.acceptance_rates,
            "novel_rates": self.novel_rates,
            "acceptance_mean": self.acceptance_mean,
            "acceptance_std": self.acceptance_std,
            "novel_mean": self.novel_mean,
            "novel_std": self.novel_std,
            "epoch_mean_energies": {str(k): v for k, v in self.epoch_mean_energies.items()},
            "epoch_std_energies": {str(k): v for k, v in self.epoch_std_energies.items()},
            "final_sequences": [list(c.final.tokens) for c in self.chains],
            "oracle": self.oracle,
        }


def build_model(config: ExperimentConfig) -> Scorer:
    spec = config.model
    if spec.backend == "tabular":
        return tabular_model_generate(spec.seed, spec.vocab_size, spec.length, spec.scale)
    if spec.backend == "file":
        return load_tabular(spec.path)
    from .bridge import connect  # deferred: only remote runs need a connection

    return connect(spec.endpoint)


def run_experiment(config: ExperimentConfig, model: Scorer | None = None) -> Report:
    """Run ``config.chains`` independent chains and aggregate their metrics.

    Chain ``i`` draws from a stream seeded by ``(master_seed, i)``, so the
    report does not depend on scheduling or parallelism.  When the model is
    enumerable and the chain is time-homogeneous, the report embeds the
    oracle's stationarity and detailed-balance checks; otherwise that
    section records why it was skipped.
    """
    if model is None:
        model = build_model(config)
    digest = config_hash(config)

    def one_chain(i: int) -> ChainResult:
        if config.forced_chain_seed is not None:
            rng = np.random.default_rng([config.forced_chain_seed])
        else:
            rng = np.random.default_rng([config.master_seed, i])
        return run_chain(model, config.sampler, rng, chain_id=i, config_hash=digest)

    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(one_chain, range(config.chains)))
    else:
        results = [one_chain(i) for i in range(config.chains)]

    acc = [r.trace.acceptance_rate for r in results]
    nov = [r.trace.novel_rate for r in results]
    field = "energy_raw" if config.sampler.kind == "raw" else "energy_norm"
    per_epoch: dict[int, list[float]] = {}
    for r in results:
        for epoch, mean in r.trace.epoch_mean_energies(field).items():
            per_epoch.setdefault(epoch, []).append(mean)
    epoch_means = {e: float(np.mean(v)) for e, v in sorted(per_epoch.items())}
    epoch_stds = {e: float(np.std(v)) for e, v in sorted(per_epoch.items())}

    return Report(
        config_hash=digest,
        chains=results,
        acceptance_rates=acc,
        novel_rates=nov,
        acceptance_mean=float(np.mean(acc)),
        acceptance_std=float(np.std(acc)),
        novel_mean=float(np.mean(nov)),
        novel_std=float(np.std(nov)),
        epoch_mean_energies=epoch_means,
        epoch_std_energies=epoch_stds,
        oracle=_oracle_section(model, config),
    )


def _oracle_section(model: Scorer, config: ExperimentConfig) -> dict | None:
    if config.oracle_checks == "off":
        return None
    sampler = config.sampler
    if sampler.anneal is not None or sampler.force_accept_epochs:
        return {"skipped": "chain is time-inhomogeneous"}
    if sampler.block is not None and sampler.block.mode != "fixed":
        return {"skipped": "annealed block sizes are time-inhomogeneous"}
    states = model.vocab.size ** model.length
    if states > MAX_KERNEL_STATES:
        warnings.warn(f"oracle checks skipped: {states} states exceed {MAX_KERNEL_STATES}")
        return {"skipped": f"{states} states exceed {MAX_KERNEL_STATES}"}
    try:
        spec = SamplerSpec(algorithm=sampler.algorithm, kind=sampler.kind,
                           target_temp=1.0, settings=sampler.settings,
                           block_size=None if sampler.block is None else
                           min(sampler.block.size, sampler.length))
        kernel = transition_kernel(model, spec)
        target = enumerate_target(model, sampler.kind)
        tv = total_variation(stationary_distribution(kernel), target.probs)
        residual = detailed_balance_residual(kernel, target)
    except StateSpaceTooLarge as exc:
        warnings.warn(f"oracle checks skipped: {exc}")
        return {"skipped": str(exc)}
    return {"stationarity_tv": tv, "detailed_balance_residual": residual}


def merged_trace(report: Report) -> Trace:
    """All chains' records in chain order, in one exportable trace."""
    merged = Trace(report.config_hash)
    for result in report.chains:
        for rec in result.trace.steps:
            merged.steps.append(rec)
            merged._accepted += rec.accepted
            if not rec.burn_in:
                merged._post_steps += 1
                merged._novel_post += rec.novel
    return merged


def write_report(report: Report, config: ExperimentConfig, out_root) -> Path:
    """Write report.json and trace exports under a timestamp+hash run dir."""
    stamp = time.strftime("%Y%m%d-%H%M%S")
    run_dir = Path(out_root) / f"{stamp}-{report.config_hash}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    trace = merged_trace(report)
    for fmt in config.formats:
        export_trace(trace, run_dir / f"trace.{'csv' if fmt == 'csv' else 'jsonl'}", fmt)
    return run_dir
