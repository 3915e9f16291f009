"""Validated configuration record and its flat ``key = value`` text form."""

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

FIXED_P_FACT_MIN = 0.85
FIXED_C_COMP_MAX = 3


@dataclass(frozen=True)
class DCoTConfig:
    alpha: float = 0.5
    gamma_ema: float = 0.9
    gamma_mix: float = 0.7
    eta_thr: float = 0.1
    eta_lr: float = 0.01
    lambda_struct: float = 0.5
    tau_0: float = 0.5
    n_experts: int = 4
    top_k: int = 2
    block_size: int = 4
    window_n: int = 16
    p_fact_min: float = FIXED_P_FACT_MIN
    c_comp_max: int = FIXED_C_COMP_MAX
    ppo_clip: float = 0.2
    step_cap: int = 8
    token_budget: int = 320
    delta_sum: float = 0.1
    mu_cost: float = 0.2
    seed: int = 0

    def to_text(self):
        return "".join(f"{f.name} = {_render(getattr(self, f.name))}\n" for f in fields(self))

    def replace(self, **changes):
        raw = {f.name: getattr(self, f.name) for f in fields(self)}
        raw.update(changes)
        override = raw["p_fact_min"] != FIXED_P_FACT_MIN or raw["c_comp_max"] != FIXED_C_COMP_MAX
        return validate_config(raw, allow_threshold_override=override)


# (lower, upper, lower inclusive, upper inclusive); None means unbounded
_UNIT = (0.0, 1.0, True, True)
_NONNEG = (0.0, None, True, False)
_POS = (0.0, None, False, False)
_BOUNDS = {
    "alpha": _UNIT,
    "gamma_ema": _UNIT,
    "gamma_mix": _UNIT,
    "eta_thr": _NONNEG,
    "eta_lr": _NONNEG,
    "lambda_struct": _NONNEG,
    "tau_0": _UNIT,
    "n_experts": (1, None, True, False),
    "top_k": (1, None, True, False),
    "block_size": (1, None, True, False),
    "window_n": (1, None, True, False),
    "p_fact_min": _UNIT,
    "c_comp_max": (0, None, True, False),
    "ppo_clip": _POS,
    "step_cap": (1, None, True, False),
    "token_budget": (1, None, True, False),
    "delta_sum": _NONNEG,
    "mu_cost": _NONNEG,
    "seed": (0, (1 << 64) - 1, True, True),
}


def _render(value):
    return repr(value) if isinstance(value, float) else str(value)


def _bound_text(lo, hi, lo_inc, hi_inc):
    if hi is None:
        return f"{'≥' if lo_inc else '>'} {lo:g}" if isinstance(lo, float) else f"≥ {lo}"
    left = "[" if lo_inc else "("
    right = "]" if hi_inc else ")"
    return f"{left}{lo:g},{hi:g}{right}" if isinstance(lo, float) else f"{left}{lo},{hi}{right}"


def _coerce(name, value, kind):
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected {kind.__name__}, got bool")
    try:
        if kind is int:
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError
                return int(value)
            return int(str(value).strip(), 0) if isinstance(value, str) else int(value)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot read {value!r} as {kind.__name__}") from None


def validate_config(raw=None, *, allow_threshold_override=False):
    """Build a :class:`DCoTConfig` from a field map, applying defaults.

    The discriminator thresholds keep their fixed values (0.85 and 3) unless
    ``allow_threshold_override`` is set.
    """
    raw = dict(raw or {})
    known = {f.name: f for f in fields(DCoTConfig)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    values = {}
    for name, f in known.items():
        kind = int if f.type in (int, "int") else float
        value = _coerce(name, raw[name], kind) if name in raw else f.default
        if kind is float and value != value:
            raise ConfigError(f"{name} is NaN")
        lo, hi, lo_inc, hi_inc = _BOUNDS[name]
        bad = (value < lo if lo_inc else value <= lo) or (
            hi is not None and (value > hi if hi_inc else value >= hi)
        )
        if bad or value in (float("inf"), float("-inf")):
            op = "∉" if hi is not None else "must be"
            raise ConfigError(f"{name} {op} {_bound_text(lo, hi, lo_inc, hi_inc)} (got {value!r})")
        values[name] = value
    if values["top_k"] > values["n_experts"]:
        raise ConfigError(f"top_k > n_experts ({values['top_k']} > {values['n_experts']})")
    if not allow_threshold_override:
        if values["p_fact_min"] != FIXED_P_FACT_MIN:
            raise ConfigError("p_fact_min is fixed at 0.85; pass allow_threshold_override to change it")
        if values["c_comp_max"] != FIXED_C_COMP_MAX:
            raise ConfigError("c_comp_max is fixed at 3; pass allow_threshold_override to change it")
    return DCoTConfig(**values)


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate field {key}")
        raw[key] = value
    return raw


def load_config(path=None, overrides=None, *, allow_threshold_override=False):
    """File values first, then ``overrides`` (e.g. from CLI flags) win."""
    raw = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return validate_config(raw, allow_threshold_override=allow_threshold_override)
