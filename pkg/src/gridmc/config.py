"""Experiment configuration files.

Experiments are declarative YAML documents (schema 1) naming the study, the
model stack, the estimator flavour and the run protocol.  Validation errors
name the offending field.  The config echoed into a results record is
sufficient to re-run the experiment identically.
"""

from dataclasses import dataclass, field, asdict
from pathlib import Path
import yaml

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]

STUDIES = ("composite", "storage")
ESTIMATORS = ("mc", "mlmc", "mlmc_expectation")
STACKS = {
    "composite": ("hl1", "hl2"),
    "storage": ("nostore", "average", "greedy", "optimal"),
}
ANALYTIC_BASES = {
    "composite": ("hl1",),
    "storage": ("nostore", "average"),
}
TIMING_MODES = ("wall", "counted")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    study: str
    estimator: str
    stack: list
    target_measure: str
    n0: int = 100
    runs: int = 10
    t_star: float = 60.0
    seed: int = 1
    alpha: float = 0.1
    timing_mode: str = "wall"
    workers: int = 1
    rating_scale: float = 0.8
    label: str = ""
    data: dict = field(default_factory=dict)
    output_dir: str = "out"
    batch_cap: int = 65536

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"study: must be one of {STUDIES}, got {self.study!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(
                f"estimator: must be one of {ESTIMATORS}, got {self.estimator!r}")
        valid = STACKS[self.study]
        self.stack = list(self.stack)
        if not self.stack:
            raise ConfigError("stack: at least one model is required")
        for name in self.stack:
            if name not in valid:
                raise ConfigError(
                    f"stack: unknown model {name!r} for study {self.study!r} "
                    f"(valid: {valid})")
        ranks = [valid.index(n) for n in self.stack]
        if ranks != sorted(set(ranks)):
            raise ConfigError("stack: models must be listed bottom-up without repeats")
        if self.estimator == "mc" and len(self.stack) != 1:
            raise ConfigError("stack: estimator 'mc' uses exactly one model")
        if self.estimator == "mlmc_expectation":
            if len(self.stack) < 1 or self.stack[0] not in ANALYTIC_BASES[self.study]:
                raise ConfigError(
                    f"stack: estimator 'mlmc_expectation' needs a level-0 model "
                    f"supporting direct evaluation ({ANALYTIC_BASES[self.study]})")
        measures = ("PLC", "EPNS") if self.study == "composite" else ("LOLE", "EENS")
        if self.target_measure not in measures:
            raise ConfigError(
                f"target_measure: {self.target_measure!r} not in {measures}")
        if self.n0 < 2:
            raise ConfigError("n0: must be >= 2")
        if self.runs < 0:
            raise ConfigError("runs: must be >= 0")
        if self.t_star <= 0:
            raise ConfigError("t_star: must be > 0")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha: must be in (0, 1]")
        if self.timing_mode not in TIMING_MODES:
            raise ConfigError(f"timing_mode: must be one of {TIMING_MODES}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if not 0.0 < self.rating_scale <= 10.0:
            raise ConfigError("rating_scale: must be in (0, 10]")
        if self.batch_cap < 1:
            raise ConfigError("batch_cap: must be >= 1")
        if not self.label:
            self.label = f"{self.study}-{self.estimator}-{'_'.join(self.stack)}"

    def echo(self) -> dict:
        return asdict(self)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: not a mapping")
    schema = doc.pop("schema", None)
    if schema != 1:
        raise ConfigError(f"schema: expected 1, got {schema!r}")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown fields: {sorted(unknown)}")
    missing = [k for k in ("study", "estimator", "stack", "target_measure")
               if k not in doc]
    if missing:
        raise ConfigError(f"missing required fields: {missing}")
    return ExperimentConfig(**doc)
