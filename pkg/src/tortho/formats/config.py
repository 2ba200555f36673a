"""Run configuration: a flat YAML (or JSON) mapping of option names to values."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from ..errors import ConfigError
from ..rasterizer import RenderOptions


@dataclass
class RunConfig:
    sx: float | None = None
    sy: float | None = None
    width: int | None = None
    height: int | None = None
    background: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    sh_degree: int = 3
    use_fagk: bool = True
    tile_size: int = 16
    sigma_cutoff: float = 3.0
    dilation: float = 0.3
    alpha_cap: float = 0.99
    alpha_min: float = 1.0 / 255.0
    t_min: float = 1e-4
    threads: int = 1
    partition_m: int = 2
    partition_n: int = 2
    expand_ratio: float = 0.2
    visibility_threshold: float = 0.25
    canny_high: float = 100.0
    line_k: float = 2.5

    def render_options(self) -> RenderOptions:
        return RenderOptions(
            tile_size=self.tile_size,
            sigma_cutoff=self.sigma_cutoff,
            alpha_cap=self.alpha_cap,
            alpha_min=self.alpha_min,
            t_min=self.t_min,
            dilation=self.dilation,
            sh_degree=self.sh_degree,
            use_fagk=self.use_fagk,
            threads=self.threads,
        )

    def updated(self, **overrides) -> "RunConfig":
        """Copy with the non-``None`` overrides applied and validated."""
        data = dataclasses.asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return config_from_mapping(data)


_POSITIVE = {"sx", "sy", "width", "height", "tile_size", "sigma_cutoff", "threads", "partition_m",
             "partition_n", "canny_high", "line_k"}
_NONNEG = {"dilation", "alpha_min", "t_min", "expand_ratio", "visibility_threshold"}


def _check(name, value, typ):
    base = typ.replace(" | None", "")
    if value is None:
        if "None" in typ:
            return None
        raise ConfigError(name, "may not be null")
    if base == "bool":
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected a boolean, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(name, f"expected {base}, got a boolean")
    if base == "int":
        if not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
    elif base == "float":
        if not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        value = float(value)
    elif base == "list":
        if not (isinstance(value, (list, tuple)) and len(value) == 3 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        )):
            raise ConfigError(name, f"expected three numbers, got {value!r}")
        value = [float(v) for v in value]
    if name in _POSITIVE and not value > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    if name in _NONNEG and not value >= 0:
        raise ConfigError(name, f"must be non-negative, got {value!r}")
    return value


def config_from_mapping(data) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    known = {f.name: f for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown key")
    values = {k: _check(k, v, known[k].type) for k, v in data.items()}
    cfg = RunConfig(**values)
    if not 0 < cfg.alpha_cap <= 1:
        raise ConfigError("alpha_cap", "must lie in (0, 1]")
    if not 0 <= cfg.sh_degree <= 3:
        raise ConfigError("sh_degree", "must lie in [0, 3]")
    return cfg


def read_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<root>", f"cannot parse: {exc}") from None
    return config_from_mapping(data)
