"""Experiment configuration: YAML/JSON files, named presets and CLI overrides."""

import copy
import enum
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigurationError
from ..stokes import ConstraintStrategy

HEAVY_LEVEL = 7
MIN_BASE_LEVEL = 1


class ExperimentKind(str, enum.Enum):
    SPECTRUM = "spectrum"
    SOLVE = "solve"
    RECOVERY = "recovery"
    TIMING = "timing"
    VALIDATE = "validate"


@dataclass
class ParamBlock:
    """One tracking-weight pair with the regularization values to sweep."""

    gamma_u: float
    gamma_p: float
    betas: list

    def __post_init__(self):
        self.gamma_u = float(self.gamma_u)
        self.gamma_p = float(self.gamma_p)
        self.betas = [float(b) for b in self.betas]


@dataclass
class ExperimentConfig:
    experiment: ExperimentKind
    levels: list = field(default_factory=lambda: [3])
    num_levels: list = field(default_factory=lambda: [1, 2])
    blocks: list = field(default_factory=list)
    strategy: str = ConstraintStrategy.ZERO_MEAN.value
    control_space: str = "full"
    tol: float = 1e-12
    max_iter: int = 100
    max_iter_unpreconditioned: int = 500
    outliers: int = 0
    out: str = None
    format: str = "csv"
    seed: int = 0
    heavy: bool = False

    def __post_init__(self):
        self.experiment = ExperimentKind(self.experiment)
        self.levels = [int(k) for k in self.levels]
        self.num_levels = [int(k) for k in self.num_levels]
        self.blocks = [b if isinstance(b, ParamBlock) else ParamBlock(**b)
                       for b in self.blocks]
        self.strategy = ConstraintStrategy.parse(self.strategy).value

    def validate(self):
        if not self.levels:
            raise ConfigurationError("no levels requested")
        if self.format not in ("csv", "json"):
            raise ConfigurationError(f"unknown output format {self.format!r}")
        if self.tol <= 0 or self.max_iter < 1 or self.max_iter_unpreconditioned < 1:
            raise ConfigurationError("tol and iteration limits must be positive")
        for block in self.blocks:
            if any(not b > 0 for b in block.betas):
                raise ConfigurationError("all beta values must be positive")
            if block.gamma_u < 0 or block.gamma_p < 0:
                raise ConfigurationError("tracking weights must be nonnegative")
        if min(self.levels) < 1:
            raise ConfigurationError("levels start at 1 (h = 1/2)")
        if max(self.levels) >= HEAVY_LEVEL and not self.heavy:
            raise ConfigurationError(
                f"level {max(self.levels)} is a heavy preset; pass --heavy")
        if self.experiment in (ExperimentKind.SOLVE, ExperimentKind.TIMING,
                               ExperimentKind.RECOVERY):
            if not self.blocks:
                raise ConfigurationError("no parameter blocks given")
            if not self.num_levels or min(self.num_levels) < 1:
                raise ConfigurationError("num_levels must be positive")
            need = MIN_BASE_LEVEL + max(self.num_levels) - 1
            if max(self.levels) < need:
                raise ConfigurationError(
                    f"{max(self.num_levels)} grid levels need a finest level "
                    f">= {need}")
        if self.experiment is ExperimentKind.SPECTRUM:
            if not self.blocks:
                raise ConfigurationError("no parameter blocks given")
            if min(self.levels) < 2:
                raise ConfigurationError("spectrum analysis starts at level 2")
        return self

    def as_dict(self):
        out = asdict(self)
        out["experiment"] = self.experiment.value
        return out


def _block(gu, gp, betas):
    return {"gamma_u": gu, "gamma_p": gp, "betas": list(betas)}


PRESETS = {
    "table1": {"experiment": "spectrum", "levels": [2, 3, 4, 5],
               "blocks": [_block(1, 0, [1.0])]},
    "table2": {"experiment": "spectrum", "levels": [2, 3, 4, 5],
               "blocks": [_block(0, 1, [1.0])]},
    "pinned-outliers": {"experiment": "spectrum", "levels": [3, 4],
                        "strategy": "pinned", "outliers": 2,
                        "blocks": [_block(0, 1, [1.0])]},
    "table3": {"experiment": "solve", "levels": [6],
               "num_levels": [1, 2, 3, 4],
               "blocks": [_block(1, 0, [1e-4, 1e-5, 1e-6, 1e-7]),
                          _block(1, 1e-5, [1e-4, 1e-5, 1e-6, 1e-7]),
                          _block(1, 1e-4, [1e-4, 1e-5, 1e-6, 1e-7]),
                          _block(1, 1e-3, [1e-4, 1e-5, 1e-6]),
                          _block(0, 1, [1e-1, 1e-2, 1e-3])]},
    "table4": {"experiment": "recovery", "levels": [5], "num_levels": [2],
               "blocks": [_block(1, 0, [1e-5, 1e-6, 1e-7]),
                          _block(1, 1e-5, [1e-5, 1e-6, 1e-7]),
                          _block(1, 1e-4, [1e-5, 1e-6, 1e-7]),
                          _block(1, 1e-3, [1e-5, 1e-6, 1e-7]),
                          _block(0, 1, [1e-1, 1e-2, 1e-3])]},
    "timing": {"experiment": "timing", "levels": [6], "num_levels": [1, 2, 4],
               "blocks": [_block(1, 0, [1e-6, 1e-7])]},
    "validate": {"experiment": "validate", "levels": [3, 4, 5]},
}
PRESETS["table3-h7"] = dict(PRESETS["table3"], levels=[7],
                            num_levels=[1, 3, 4], heavy=True)
PRESETS["table3-h8"] = dict(PRESETS["table3"], levels=[8],
                            num_levels=[1, 4], heavy=True)
PRESETS["timing-h8"] = dict(PRESETS["timing"], levels=[8],
                            num_levels=[1, 4], heavy=True)


def load_config(source):
    """Read a config file (YAML or JSON) or look up a named preset."""
    if source in PRESETS:
        return copy.deepcopy(PRESETS[source])
    path = Path(source)
    if not path.is_file():
        raise ConfigurationError(
            f"{source!r} is neither a file nor a preset "
            f"({', '.join(sorted(PRESETS))})")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: expected a mapping at top level")
    return data


def parse_levels(text):
    """``"2,3,5"`` or ``"2..5"`` to a list of ints."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def parse_floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def build_config(base=None, **overrides):
    """Merge flag overrides (``None`` means unset) into a base mapping."""
    data = copy.deepcopy(base) if base else {}
    betas = overrides.pop("beta", None)
    gamma_u = overrides.pop("gamma_u", None)
    gamma_p = overrides.pop("gamma_p", None)
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if betas is not None or gamma_u is not None or gamma_p is not None:
        first = (data.get("blocks") or [{}])[0]
        if isinstance(first, ParamBlock):
            first = asdict(first)
        data["blocks"] = [{
            "gamma_u": first.get("gamma_u", 1.0) if gamma_u is None else gamma_u,
            "gamma_p": first.get("gamma_p", 0.0) if gamma_p is None else gamma_p,
            "betas": first.get("betas", [1e-4]) if betas is None else betas,
        }]
    if "experiment" not in data:
        raise ConfigurationError("no experiment given (--experiment or config)")
    try:
        return ExperimentConfig(**data).validate()
    except TypeError as exc:
        raise ConfigurationError(f"bad config: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad config: {exc}") from None
