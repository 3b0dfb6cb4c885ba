"""Experiment configuration: flat sectioned key/value files plus overrides.

Sections are named after the subsystems they configure ([energy],
[proposal], [sampler], [diag-io]); unknown sections or keys are hard errors
so typos cannot silently fall back to defaults.  ``SEQMC_SEED`` in the
environment overrides the master seed.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, fields

from .errors import ConfigInvalid
from .proposal import BlockPolicy, ProposalSettings
from .sampler import AnnealSchedule, SamplerConfig

_SECTION_KEYS = {
    "energy": {"model", "seed", "vocab_size", "length", "scale", "path",
               "endpoint", "kind"},
    "proposal": {"temperature", "nucleus", "defensive", "block_mode",
                 "block_size", "block_fraction"},
    "sampler": {"algorithm", "epochs", "burn_in", "chains", "master_seed",
                "positions", "warm_start", "anneal_rate", "anneal_floor",
                "anneal_initial", "force_accept_epochs", "track_both_energies",
                "forced_chain_seed"},
    "diag-io": {"output_dir", "formats", "parallelism", "oracle_checks"},
}


@dataclass(frozen=True)
class ModelSpec:
    """Which scorer to run against.

    ``tabular`` generates a seeded toy model, ``file`` loads one from a
    model file, and ``remote`` attaches to a protocol-v1 scorer server.
    """

    backend: str = "tabular"  # "tabular" | "file" | "remote"
    seed: int = 7
    vocab_size: int = 3
    length: int = 3
    scale: float = 2.0
    path: str | None = None
    endpoint: str | None = None

    def __post_init__(self):
        if self.backend not in ("tabular", "file", "remote"):
            raise ConfigInvalid(f"unknown model backend {self.backend!r}")
        if self.backend == "file" and not self.path:
            raise ConfigInvalid("file backend needs energy.path")
        if self.backend == "remote" and not self.endpoint:
            raise ConfigInvalid("remote backend needs energy.endpoint")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec = ModelSpec()
    sampler: SamplerConfig = SamplerConfig("mh", "raw", 3, 26)
    chains: int = 5
    master_seed: int = 1234
    forced_chain_seed: int | None = None
    parallelism: int = 1
    oracle_checks: str = "auto"  # "auto" | "off"
    output_dir: str | None = None
    formats: tuple[str, ...] = ("csv", "jsonl")

    def __post_init__(self):
        if self.chains < 1:
            raise ConfigInvalid(f"chains must be >= 1, got {self.chains}")
        if self.parallelism < 1:
            raise ConfigInvalid(f"parallelism must be >= 1, got {self.parallelism}")
        if self.oracle_checks not in ("auto", "off"):
            raise ConfigInvalid(f"oracle_checks must be auto or off, got {self.oracle_checks}")
        for fmt in self.formats:
            if fmt not in ("csv", "jsonl"):
                raise ConfigInvalid(f"unknown trace format {fmt!r}")


def _to_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"expected a boolean, got {raw!r}")


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse config text, apply ``section.key -> value`` overrides, validate."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigInvalid(f"cannot parse config: {exc}") from exc

    values: dict[str, dict[str, str]] = {s: {} for s in _SECTION_KEYS}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigInvalid(f"unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _SECTION_KEYS[section]:
                raise ConfigInvalid(f"unknown key {key!r} in section [{section}]")
            values[section][key] = value
    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigInvalid(f"override {dotted!r} must look like section.key")
        section, key = dotted.split(".", 1)
        if section not in _SECTION_KEYS or key not in _SECTION_KEYS[section]:
            raise ConfigInvalid(f"unknown override {dotted!r}")
        values[section][key] = value

    env_seed = os.environ.get("SEQMC_SEED")
    if env_seed is not None:
        values["sampler"]["master_seed"] = env_seed

    try:
        return _assemble(values)
    except ConfigInvalid:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc


def _assemble(values: dict[str, dict[str, str]]) -> ExperimentConfig:
    energy = values["energy"]
    proposal = values["proposal"]
    sampler = values["sampler"]
    diag = values["diag-io"]

    model = ModelSpec(
        backend=energy.get("model", "tabular"),
        seed=int(energy.get("seed", 7)),
        vocab_size=int(energy.get("vocab_size", 3)),
        length=int(energy.get("length", 3)),
        scale=float(energy.get("scale", 2.0)),
        path=energy.get("path"),
        endpoint=energy.get("endpoint"),
    )

    settings = ProposalSettings(
        temperature=float(proposal.get("temperature", 1.0)),
        nucleus=float(proposal.get("nucleus", 1.0)),
        defensive=float(proposal.get("defensive", 0.01)),
    )
    block_mode = proposal.get("block_mode", "off")
    if block_mode == "off":
        block = None
    elif block_mode == "fixed":
        block = BlockPolicy("fixed", size=int(proposal.get("block_size", 1)))
    elif block_mode == "annealed":
        block = BlockPolicy("annealed",
                            initial_fraction=float(proposal.get("block_fraction", 0.5)))
    else:
        raise ConfigInvalid(f"unknown block_mode {block_mode!r}")

    anneal = None
    if "anneal_rate" in sampler:
        anneal = AnnealSchedule(rate=float(sampler["anneal_rate"]),
                                initial=float(sampler.get("anneal_initial", 1.0)),
                                floor=float(sampler.get("anneal_floor", 0.05)))

    chain_config = SamplerConfig(
        algorithm=sampler.get("algorithm", "mh"),
        kind=energy.get("kind", "raw"),
        length=model.length,
        epochs=int(sampler.get("epochs", 26)),
        burn_in=int(sampler.get("burn_in", 7)),
        settings=settings,
        positions=sampler.get("positions", "random"),
        warm=sampler.get("warm_start", "greedy"),
        block=block,
        anneal=anneal,
        force_accept_epochs=int(sampler.get("force_accept_epochs", 0)),
        track_both_energies=_to_bool(sampler.get("track_both_energies", "false")),
    )

    formats = tuple(f.strip() for f in diag.get("formats", "csv,jsonl").split(",") if f.strip())
    forced = sampler.get("forced_chain_seed")
    return ExperimentConfig(
        model=model,
        sampler=chain_config,
        chains=int(sampler.get("chains", 5)),
        master_seed=int(sampler.get("master_seed", 1234)),
        forced_chain_seed=int(forced) if forced is not None else None,
        parallelism=int(diag.get("parallelism", 1)),
        oracle_checks=diag.get("oracle_checks", "auto"),
        output_dir=diag.get("output_dir"),
        formats=formats,
    )


def load_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    try:
        text = open(path).read()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)


_UNHASHED_FIELDS = {"output_dir", "parallelism", "formats"}


def config_hash(config: ExperimentConfig) -> str:
    """Short content hash; path and execution metadata are excluded."""
    parts = []

    def walk(prefix: str, obj) -> None:
        if hasattr(obj, "__dataclass_fields__"):
            for f in fields(obj):
                if f.name in _UNHASHED_FIELDS:
                    continue
                walk(f"{prefix}{f.name}.", getattr(obj, f.name))
        else:
            parts.append(f"{prefix[:-1]}={obj!r}")

    walk("", config)
    digest = hashlib.sha256("\n".join(sorted(parts)).encode()).hexdigest()
    return digest[:12]
