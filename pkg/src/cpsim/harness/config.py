"""TOML experiment configuration with kebab-case keys and strict validation."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError, CpsimError
from ..oracles import SingularDriftParams, VolterraMomentParams

KINDS = ("sde-moments", "sve-moments", "sde-strong-rate", "sve-weak-rate", "lemma-checks", "kernel-table", "oracle")

SDE_MODEL_KEYS = {f.name for f in fields(SingularDriftParams)}
SVE_MODEL_KEYS = {f.name for f in fields(VolterraMomentParams)} - {"x0_mean", "x0_sq_mean"}


@dataclass(frozen=True)
class InitialValue:
    """Distribution of the initial state: ``constant``, ``normal`` or ``uniform``."""

    kind: str = "constant"
    value: float = 1.0
    mean: float = 0.0
    std: float = 1.0
    low: float = 0.0
    high: float = 1.0

    @property
    def first_moment(self) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "normal":
            return self.mean
        return 0.5 * (self.low + self.high)

    @property
    def second_moment(self) -> float:
        if self.kind == "constant":
            return self.value**2
        if self.kind == "normal":
            return self.mean**2 + self.std**2
        return (self.low**2 + self.low * self.high + self.high**2) / 3.0


@dataclass(frozen=True)
class LemmaLattice:
    alphas: tuple = (0.5, 1.0)
    betas: tuple = (0.5, 1.0)
    ks: tuple = (1, 10, 100)
    ps: tuple = (1.0, 2.0, 4.0)
    ts: tuple = (0.5, 1.0, 2.0)
    epsilons: tuple = (0.1, 0.01)
    ratio_limit: float = 10.0


@dataclass(frozen=True)
class KernelLattice:
    hs: tuple = (0.25, 0.5, 0.75)
    ts: tuple = (0.5, 1.0)
    ss: tuple = (0.1, 0.25, 0.4, 0.5, 0.75, 0.9)
    method: str = "closed-form-F"


@dataclass(frozen=True)
class OracleSettings:
    step: float = 2.0**-10
    tol: float = 1e-8
    max_terms: int = 60


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    master_seed: int = 20240601
    n_paths: int = 10_000
    horizon: float = 1.0
    epsilon: float = 0.001
    epsilon_ladder: tuple = ()
    em_step: float | None = None
    eval_times: tuple = (0.25, 0.5, 0.75, 1.0)
    output: str = "out"
    relative_band: float | None = None
    z_threshold: float = 4.0
    slope_band: tuple = (0.3, 0.7)
    chunk_size: int = 2048
    x0: InitialValue = field(default_factory=InitialValue)
    sde_model: SingularDriftParams | None = None
    sve_model: VolterraMomentParams | None = None
    lemma: LemmaLattice = field(default_factory=LemmaLattice)
    kernel: KernelLattice = field(default_factory=KernelLattice)
    oracle: OracleSettings = field(default_factory=OracleSettings)

    @property
    def em_h(self) -> float:
        return self.epsilon if self.em_step is None else self.em_step

    def with_overrides(self, seed=None, paths=None, out=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, master_seed=int(seed))
        if paths is not None:
            cfg = replace(cfg, n_paths=int(paths))
        if out is not None:
            cfg = replace(cfg, output=str(out))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master-seed must be a 64-bit unsigned integer")
        if self.n_paths < 1:
            raise ConfigError("n-paths must be positive")
        statistical = self.kind in ("sde-moments", "sve-moments", "sde-strong-rate", "sve-weak-rate", "lemma-checks")
        if statistical and self.n_paths < 100:
            raise ConfigError("statistical experiments need n-paths >= 100")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.em_step is not None and not self.em_step > 0:
            raise ConfigError("em-step must be positive")
        if self.chunk_size < 1:
            raise ConfigError("chunk-size must be positive")
        ladder = self.epsilon_ladder
        if ladder:
            if any(not e > 0 for e in ladder):
                raise ConfigError("epsilon-ladder entries must be positive")
            if any(b >= a for a, b in zip(ladder, ladder[1:])):
                raise ConfigError("epsilon-ladder must be strictly decreasing")
        if self.kind == "sde-strong-rate" and len(ladder) < 4:
            raise ConfigError("the strong-rate regression needs at least 4 ladder points")
        if self.kind == "sve-weak-rate" and len(ladder) < 2:
            raise ConfigError("the weak-rate check needs at least 2 ladder points")
        if self.kind in ("sde-moments", "sve-moments", "sve-weak-rate"):
            if len(self.eval_times) == 0:
                raise ConfigError("eval-times is empty")
            if any(t < 0 or t > self.horizon for t in self.eval_times):
                raise ConfigError("eval-times must lie in [0, horizon]")
        if self.kind in ("sde-moments", "sde-strong-rate") and self.sde_model is None:
            raise ConfigError("a [model] table with the singular-drift parameters is required")
        if self.kind in ("sde-moments", "sde-strong-rate") and self.horizon > 1.0:
            raise ConfigError("the singular-drift model is defined on [0, 1]")
        if self.kind in ("sve-moments", "sve-weak-rate", "oracle") and self.sve_model is None:
            raise ConfigError("a [model] table with the Volterra parameters is required")
        if self.x0.kind not in ("constant", "normal", "uniform"):
            raise ConfigError(f"unknown x0 distribution {self.x0.kind!r}")
        if self.kernel.method not in ("closed-form-F", "integral-representation"):
            raise ConfigError(f"unknown kernel method {self.kernel.method!r}")


_TOP = {
    "kind": str,
    "master-seed": int,
    "n-paths": int,
    "horizon": float,
    "epsilon": float,
    "epsilon-ladder": list,
    "em-step": float,
    "eval-times": list,
    "output": str,
    "relative-band": float,
    "z-threshold": float,
    "slope-band": list,
    "chunk-size": int,
}
_TABLES = {"model", "x0", "lemma", "kernel", "oracle"}
_LEMMA = {"alphas": list, "betas": list, "ks": list, "ps": list, "ts": list, "epsilons": list, "ratio-limit": float}
_KERNEL = {"hs": list, "ts": list, "ss": list, "method": str}
_ORACLE = {"step": float, "tol": float, "max-terms": int}
_X0 = {"kind": str, "value": float, "mean": float, "std": float, "low": float, "high": float}


def _snake(key: str) -> str:
    return key.replace("-", "_")


def _coerce(where: str, key: str, value, kind):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is list and isinstance(value, list):
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where}{key}: expected a list of numbers")
        return tuple(value)
    if kind is str and isinstance(value, str):
        return value
    raise ConfigError(f"{where}{key}: expected {kind.__name__}, got {type(value).__name__}")


def _section(raw: dict, schema: dict, where: str) -> dict:
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'top level'}: {sorted(unknown)}")
    return {_snake(k): _coerce(f"{where}.", k, v, schema[k]) if where else _coerce("", k, v, schema[k])
            for k, v in raw.items()}


def config_from_dict(raw: dict, kind: str | None = None) -> ExperimentConfig:
    """Build and validate a config from parsed TOML; ``kind`` overrides/fills the ``kind`` key."""
    top = {k: v for k, v in raw.items() if k not in _TABLES}
    tables = {k: v for k, v in raw.items() if k in _TABLES}
    for name, val in tables.items():
        if not isinstance(val, dict):
            raise ConfigError(f"{name} must be a table")
    args = _section(top, _TOP, "")
    if kind is not None:
        if "kind" in args and args["kind"] != kind:
            raise ConfigError(f"config kind {args['kind']!r} does not match subcommand {kind!r}")
        args["kind"] = kind
    if "kind" not in args:
        raise ConfigError("missing 'kind'")
    if "slope_band" in args and len(args["slope_band"]) != 2:
        raise ConfigError("slope-band needs two numbers")
    if "x0" in tables:
        args["x0"] = InitialValue(**_section(tables["x0"], _X0, "x0"))
    if "lemma" in tables:
        lem = _section(tables["lemma"], _LEMMA, "lemma")
        if "ks" in lem:
            lem["ks"] = tuple(int(k) for k in lem["ks"])
        args["lemma"] = LemmaLattice(**lem)
    if "kernel" in tables:
        args["kernel"] = KernelLattice(**_section(tables["kernel"], _KERNEL, "kernel"))
    if "oracle" in tables:
        args["oracle"] = OracleSettings(**_section(tables["oracle"], _ORACLE, "oracle"))
    if "model" in tables:
        model = tables["model"]
        schema_keys = SDE_MODEL_KEYS if args["kind"] in ("sde-moments", "sde-strong-rate") else SVE_MODEL_KEYS
        params = _section(model, {k.replace("_", "-"): float for k in schema_keys}, "model")
        try:
            if args["kind"] in ("sde-moments", "sde-strong-rate"):
                args["sde_model"] = SingularDriftParams(**params)
            else:
                x0 = args.get("x0", InitialValue())
                args["sve_model"] = VolterraMomentParams(
                    **params, x0_mean=x0.first_moment, x0_sq_mean=x0.second_moment)
        except CpsimError as exc:
            raise ConfigError(f"model: {exc}") from exc
    cfg = ExperimentConfig(**args)
    cfg.validate()
    return cfg


def load_config(path, kind: str | None = None) -> ExperimentConfig:
    """Read a TOML file; all validation failures raise :class:`ConfigError`."""
    p = Path(path)
    try:
        with p.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {p}: {exc}") from exc
    return config_from_dict(raw, kind)
