"""Experiment configuration: one JSON document, validated up front.

Every section is a flat object; unknown keys anywhere raise
:class:`~slowcv.errors.ConfigError`. Missing keys take the defaults below,
which are the desk-scale settings of the double-well reproduction.

Example
-------
.. code-block:: json

    {
      "task": "train_eigen_transfer",
      "potential": {"kind": "example1", "epsilon": 0.5},
      "beta": 4.0,
      "sampling": {"dt": 0.005, "n_steps": 100000, "stride": 2, "seed": 2046},
      "architecture": {"eigen": [2, 20, 20, 20, 1]},
      "training": {"batch_size": 20000, "epochs": 500, "tau": 1.0}
    }
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .potentials import KINDS, PotentialSpec, Thermo

TASKS = (
    "train_ae",
    "train_tlae",
    "train_eigen_transfer",
    "train_eigen_generator",
    "oracle_report",
    "mep",
    "evaluate",
)

_TOP = ("task", "potential", "beta", "sampling", "architecture", "training", "oracle", "mep", "export",
        "evaluate", "out")
_POTENTIAL = ("kind", "epsilon")


@dataclass(frozen=True)
class SamplingConfig:
    dt: float = 0.005
    n_steps: int = 100_000
    stride: int = 2
    seed: int = 2046
    x0: tuple | None = None


@dataclass(frozen=True)
class ArchitectureConfig:
    encoder: tuple = (2, 30, 30, 30, 30, 1)
    decoder: tuple = (1, 30, 30, 30, 2)
    eigen: tuple = (2, 20, 20, 20, 1)


@dataclass(frozen=True)
class TrainingConfig:
    lr: float = 0.005
    batch_size: int = 20_000
    epochs: int = 500
    seed: int = 2046
    alpha: float = 10.0
    omegas: tuple = (1.0,)
    tau: float | None = None  # physical lag; give either tau or lag
    lag: int | None = None  # lag in recorded steps
    k: int = 1
    var_guard: float = 1e-6


@dataclass(frozen=True)
class OracleConfig:
    resolution: tuple = (161, 161)
    bounds: tuple | None = None
    n_eigs: int = 3
    ulam_bins: tuple | None = None  # (n1, n2); Ulam model from the sampled data when given


@dataclass(frozen=True)
class MepConfig:
    a: tuple = (-1.0, 0.0)
    b: tuple = (1.0, 0.0)
    M: int = 50
    step: float = 1e-3
    max_iters: int = 50_000
    tol: float = 1e-6


@dataclass(frozen=True)
class ExportConfig:
    resolution: tuple = (101, 101)
    bounds: tuple | None = None
    fd_check: bool = True  # compare eigenvalue estimates with the grid generator


@dataclass(frozen=True)
class EvaluateConfig:
    run_dir: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    potential: PotentialSpec
    thermo: Thermo
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    mep: MepConfig = field(default_factory=MepConfig)
    export: ExportConfig = field(default_factory=ExportConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)
    out: str | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)  # the document as given


def _section(raw: dict, name: str, cls):
    d = raw.get(name, {})
    if not isinstance(d, dict):
        raise ConfigError(f"section {name!r} must be an object")
    allowed = tuple(cls.__dataclass_fields__)
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {unknown}")
    return d


def _num(sec, key, value, *, integer=False, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{sec}.{key} must be a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigError(f"{sec}.{key} must be an integer, got {value!r}")
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigError(f"{sec}.{key} must be finite")
    if positive and not value > 0:
        raise ConfigError(f"{sec}.{key} must be positive, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(f"{sec}.{key} must be non-negative, got {value!r}")
    return int(value) if integer else float(value)


def _seq(sec, key, value, n=None, integer=False, positive=False):
    if not isinstance(value, (list, tuple)) or (n is not None and len(value) != n):
        want = f"a list of length {n}" if n is not None else "a list"
        raise ConfigError(f"{sec}.{key} must be {want}, got {value!r}")
    return tuple(_num(sec, key, v, integer=integer, positive=positive) for v in value)


def _bounds(sec, value):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{sec}.bounds must be [[a1, b1], [a2, b2]]")
    out = tuple(_seq(sec, "bounds", b, 2) for b in value)
    if any(lo >= hi for lo, hi in out):
        raise ConfigError(f"{sec}.bounds must have lower < upper")
    return out


def _layers(key, value, n_in, n_out):
    sizes = _seq("architecture", key, value, integer=True, positive=True)
    if len(sizes) < 2:
        raise ConfigError(f"architecture.{key} needs at least an input and an output size")
    if sizes[0] != n_in or sizes[-1] != n_out:
        raise ConfigError(f"architecture.{key} must map {n_in} -> {n_out}, got {list(sizes)}")
    return sizes


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config document and build an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        On unknown keys, wrong types or out-of-range values.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_TOP))
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")

    pot = raw.get("potential", {"kind": "example1"})
    if isinstance(pot, str):
        pot = {"kind": pot}
    if not isinstance(pot, dict):
        raise ConfigError("potential must be a name or an object")
    bad = sorted(set(pot) - set(_POTENTIAL))
    if bad:
        raise ConfigError(f"unknown keys in 'potential': {bad}")
    if pot.get("kind") not in KINDS:
        raise ConfigError(f"potential.kind must be one of {KINDS}, got {pot.get('kind')!r}")
    if "epsilon" in pot and pot["kind"] != "example1":
        raise ConfigError("potential.epsilon only applies to example1")
    eps = _num("potential", "epsilon", pot.get("epsilon", 0.5), positive=True)
    potential = PotentialSpec(pot["kind"], eps)
    thermo = Thermo(_num("config", "beta", raw.get("beta", 1.0), positive=True))

    s = _section(raw, "sampling", SamplingConfig)
    x0 = s.get("x0")
    sampling = SamplingConfig(
        dt=_num("sampling", "dt", s.get("dt", 0.005), positive=True),
        n_steps=_num("sampling", "n_steps", s.get("n_steps", 100_000), integer=True, positive=True),
        stride=_num("sampling", "stride", s.get("stride", 2), integer=True, positive=True),
        seed=_num("sampling", "seed", s.get("seed", 2046), integer=True, nonneg=True),
        x0=None if x0 is None else _seq("sampling", "x0", x0, 2),
    )

    a = _section(raw, "architecture", ArchitectureConfig)
    enc = _seq("architecture", "encoder", a.get("encoder", ArchitectureConfig.encoder), integer=True, positive=True)
    if len(enc) < 2 or enc[0] != 2:
        raise ConfigError(f"architecture.encoder must start with input size 2, got {list(enc)}")
    dec = _layers("decoder", a.get("decoder", (enc[-1],) + ArchitectureConfig.decoder[1:]), enc[-1], 2)
    eig = _layers("eigen", a.get("eigen", ArchitectureConfig.eigen), 2, 1)
    architecture = ArchitectureConfig(enc, dec, eig)

    t = _section(raw, "training", TrainingConfig)
    if "tau" in t and "lag" in t:
        raise ConfigError("give either training.tau or training.lag, not both")
    omegas = _seq("training", "omegas", t.get("omegas", [1.0]), positive=True)
    k = _num("training", "k", t.get("k", 1), integer=True, positive=True)
    if len(omegas) != k:
        raise ConfigError(f"training.omegas needs k={k} entries, got {len(omegas)}")
    training = TrainingConfig(
        lr=_num("training", "lr", t.get("lr", 0.005), positive=True),
        batch_size=_num("training", "batch_size", t.get("batch_size", 20_000), integer=True, positive=True),
        epochs=_num("training", "epochs", t.get("epochs", 500), integer=True, positive=True),
        seed=_num("training", "seed", t.get("seed", 2046), integer=True, nonneg=True),
        alpha=_num("training", "alpha", t.get("alpha", 10.0), positive=True),
        omegas=omegas,
        tau=None if "tau" not in t else _num("training", "tau", t["tau"], nonneg=True),
        lag=None if "lag" not in t else _num("training", "lag", t["lag"], integer=True, nonneg=True),
        k=k,
        var_guard=_num("training", "var_guard", t.get("var_guard", 1e-6), positive=True),
    )
    if task == "train_eigen_transfer" and training.tau is None and training.lag is None:
        raise ConfigError("train_eigen_transfer needs training.tau or training.lag")
    if task == "train_eigen_transfer" and (training.tau == 0 or training.lag == 0):
        raise ConfigError("the transfer loss needs a positive lag")
    if training.tau is not None:
        eff = sampling.dt * sampling.stride
        j = round(training.tau / eff)
        if abs(j * eff - training.tau) > 1e-9 * max(1.0, training.tau):
            raise ConfigError(f"training.tau={training.tau} is not a multiple of dt*stride={eff}")
    if task.startswith("train_"):
        n_points = sampling.n_steps // sampling.stride
        lag = training.lag if training.lag is not None else round((training.tau or 0.0)
                                                                   / (sampling.dt * sampling.stride))
        if n_points - lag < 2:
            raise ConfigError(f"sampling yields {n_points} points, too few for lag {lag}")

    o = _section(raw, "oracle", OracleConfig)
    ub = o.get("ulam_bins")
    oracle = OracleConfig(
        resolution=_seq("oracle", "resolution", o.get("resolution", [161, 161]), 2, integer=True, positive=True),
        bounds=_bounds("oracle", o.get("bounds")),
        n_eigs=_num("oracle", "n_eigs", o.get("n_eigs", 3), integer=True, positive=True),
        ulam_bins=None if ub is None else _seq("oracle", "ulam_bins", ub, 2, integer=True, positive=True),
    )
    if min(oracle.resolution) < 3:
        raise ConfigError("oracle.resolution needs at least 3 nodes per axis")

    m = _section(raw, "mep", MepConfig)
    mep = MepConfig(
        a=_seq("mep", "a", m.get("a", [-1.0, 0.0]), 2),
        b=_seq("mep", "b", m.get("b", [1.0, 0.0]), 2),
        M=_num("mep", "M", m.get("M", 50), integer=True, positive=True),
        step=_num("mep", "step", m.get("step", 1e-3), positive=True),
        max_iters=_num("mep", "max_iters", m.get("max_iters", 50_000), integer=True, positive=True),
        tol=_num("mep", "tol", m.get("tol", 1e-6), positive=True),
    )
    if mep.M < 10:
        raise ConfigError("mep.M must be at least 10")

    e = _section(raw, "export", ExportConfig)
    fd_check = e.get("fd_check", True)
    if not isinstance(fd_check, bool):
        raise ConfigError("export.fd_check must be true or false")
    export = ExportConfig(
        resolution=_seq("export", "resolution", e.get("resolution", [101, 101]), 2, integer=True, positive=True),
        bounds=_bounds("export", e.get("bounds")),
        fd_check=fd_check,
    )

    ev = _section(raw, "evaluate", EvaluateConfig)
    run_dir = ev.get("run_dir")
    if run_dir is not None and not isinstance(run_dir, str):
        raise ConfigError("evaluate.run_dir must be a path string")
    if task == "evaluate" and run_dir is None:
        raise ConfigError("the evaluate task needs evaluate.run_dir")

    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out must be a path string")

    return ExperimentConfig(task, potential, thermo, sampling, architecture, training, oracle, mep, export,
                            EvaluateConfig(run_dir), out, copy.deepcopy(raw))


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)


_EX1 = {"potential": {"kind": "example1", "epsilon": 0.5}, "beta": 4.0,
        "sampling": {"dt": 0.005, "n_steps": 100_000, "stride": 2, "seed": 2046, "x0": [1.0, 0.0]}}
_EX2 = {"potential": {"kind": "example2"}, "beta": 1.5,
        "sampling": {"dt": 0.005, "n_steps": 500_000, "stride": 2, "seed": 2046, "x0": [2.0, 0.0]}}

BUILTIN = {
    "example1-ae": dict(_EX1, task="train_ae",
                        architecture={"encoder": [2, 30, 30, 30, 30, 1], "decoder": [1, 30, 30, 30, 2]},
                        training={"lr": 0.005, "batch_size": 20_000, "epochs": 500, "seed": 2046},
                        export={"resolution": [101, 101], "bounds": [[-2.0, 2.0], [-1.5, 2.5]]}),
    "example1-eigen": dict(_EX1, task="train_eigen_transfer",
                           architecture={"eigen": [2, 20, 20, 20, 1]},
                           training={"lr": 0.005, "batch_size": 20_000, "epochs": 500, "seed": 2046,
                                     "alpha": 10.0, "omegas": [1.0], "k": 1, "tau": 1.0},
                           oracle={"resolution": [161, 161]},
                           export={"resolution": [101, 101], "bounds": [[-2.0, 2.0], [-1.5, 2.5]]}),
    "example2-ae": dict(_EX2, task="train_ae",
                        architecture={"encoder": [2, 30, 30, 30, 30, 1], "decoder": [1, 30, 30, 30, 2]},
                        training={"lr": 0.005, "batch_size": 100_000, "epochs": 1000, "seed": 2046},
                        export={"resolution": [141, 101], "bounds": [[-3.5, 3.5], [-2.5, 2.5]]}),
    "example2-eigen": dict(_EX2, task="train_eigen_transfer",
                           architecture={"eigen": [2, 20, 20, 20, 1]},
                           training={"lr": 0.005, "batch_size": 100_000, "epochs": 1000, "seed": 2046,
                                     "alpha": 10.0, "omegas": [1.0], "k": 1, "tau": 0.5},
                           oracle={"resolution": [141, 101]},
                           export={"resolution": [141, 101], "bounds": [[-3.5, 3.5], [-2.5, 2.5]]}),
}


def builtin_config(name: str) -> dict:
    """A fresh copy of one of the bundled reproduction configs."""
    if name not in BUILTIN:
        raise ConfigError(f"unknown reproduction {name!r}; choose from {sorted(BUILTIN)}")
    return copy.deepcopy(BUILTIN[name])
