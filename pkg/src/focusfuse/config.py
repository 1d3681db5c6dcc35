"""Flat ``key = value`` configuration with dotted keys."""
from __future__ import annotations

from pathlib import Path

from .pipeline import Chroma, FusionConfig, Mode
from .ssf import SsfParams


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default)
KEYS = {
    "mode": (lambda s: Mode(s.lower()).value, Mode.TRI.value),
    "chroma": (lambda s: Chroma(s.lower()).value, Chroma.CARRY_FROM_VISIBLE.value),
    "ssf.alpha": (float, 0.8),
    "ssf.lambda": (float, 0.05),
    "ssf.beta0": (float, None),
    "ssf.beta_mult": (float, 2.0),
    "ssf.beta_max": (float, 1e5),
    "ssf.inner_tol": (float, 1e-4),
    "ssf.max_outer_iters": (int, 30),
    "ssf.solver": (str, "dct"),
    "pyr.levels": (int, 3),
    "sf.window": (int, 7),
    "grad.p": (float, 0.8),
    "cv.levels": (int, 3),
    "cv.area_frac": (float, 0.01),
    "struct.block": (int, 3),
    "struct.balance_visible": (_bool, True),
}


def defaults() -> dict:
    return {k: d for k, (_, d) in KEYS.items()}


def parse_value(key: str, text) -> object:
    if key not in KEYS:
        raise ConfigError(f"unknown config key: {key}")
    try:
        return KEYS[key][0](text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        values[key] = parse_value(key, val.strip())
    return values


def merge(file_values: dict | None = None, flag_values: dict | None = None) -> dict:
    """Flags override file values override defaults."""
    out = defaults()
    for src in (file_values or {}, flag_values or {}):
        for k, v in src.items():
            if k not in KEYS:
                raise ConfigError(f"unknown config key: {k}")
            if v is not None:
                out[k] = v
    return out


def to_fusion_config(values: dict, threads: int = 1) -> FusionConfig:
    ssf = SsfParams(
        alpha=values["ssf.alpha"],
        lam=values["ssf.lambda"],
        beta0=values["ssf.beta0"],
        beta_mult=values["ssf.beta_mult"],
        beta_max=values["ssf.beta_max"],
        inner_tol=values["ssf.inner_tol"],
        max_outer_iters=values["ssf.max_outer_iters"],
        solver=values["ssf.solver"],
    )
    return FusionConfig(
        mode=values["mode"],
        ssf=ssf,
        pyr_levels=values["pyr.levels"],
        sf_window=values["sf.window"],
        grad_p=values["grad.p"],
        cv_levels=values["cv.levels"],
        cv_area_frac=values["cv.area_frac"],
        struct_block=values["struct.block"],
        balance_visible=values["struct.balance_visible"],
        chroma=values["chroma"],
        threads=threads,
    )
