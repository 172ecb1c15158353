"""Flat dotted-key configuration: parsing, defaults, round-trip serialization.

The file format is one ``key = value`` pair per line, ``#`` comments, and
blank lines; CLI overrides use the same dotted names.  After
normalization every default is explicit, and serialize/parse round-trips
bit-for-bit.
"""

from __future__ import annotations

import hashlib

from . import families, observables
from .errors import ConfigError

FAMILY_ALIASES = {
    "tent": "tent_slope",
    "tent_slope": "tent_slope",
    "beta": "beta",
    "doubling": "constant_doubling",
    "constant_doubling": "constant_doubling",
    "markov": "markov_full_branch",
    "markov_full_branch": "markov_full_branch",
}

FAMILY_WINDOW_DEFAULTS = {
    "tent_slope": 0.1,
    "beta": 0.05,
    "constant_doubling": 1.0,
    "markov_full_branch": 0.05,
}

FAMILY_X0_DEFAULTS = {
    "tent_slope": "postcritical",
    "beta": "affine",
    "constant_doubling": "identity",
    "markov_full_branch": "affine",
}

# every key the configuration accepts, with its normalization default;
# None means "resolved during normalization"
DEFAULTS = {
    "family.kind": "tent_slope",
    "family.s0": 1.9,
    "family.beta0": families.GOLDEN_BETA,
    "family.amplitude": 0.1,
    "family.window": None,
    "family.x0": None,
    "family.x0_xstar": 0.3,
    "family.x0_kappa": 10.0,
    "observable.preset": "cos1",
    "observable.coeffs": "",
    "observable.indicator_lo": 0.0,
    "observable.indicator_hi": 0.5,
    "observable.alpha": 1.0,
    "observable.window_a": 0.25,
    "observable.probe_count": 257,
    "solver.grid_count": 4096,
    "solver.tolerance": 1e-12,
    "solver.max_iterations": 100000,
    "solver.gk_tolerance": 1e-9,
    "solver.max_lag": 256,
    "solver.scan_points": 64,
    "solver.scan_grid_count": 2048,
    "solver.holder_kappa": 0.5,
    "experiment.a": 0.0,
    "experiment.n": 10000,
    "experiment.n_max": 100000,
    "experiment.samples": 1000,
    "experiment.seed": 0,
    "experiment.threads": 0,  # 0 = size the pool to the available cores
    "experiment.ks_threshold": 0.05,
    "experiment.checkpoint_base": 1.5,
    "experiment.lil_band_lo": 0.5,
    "experiment.lil_band_hi": 1.5,
    "experiment.lil_pass_fraction": 0.9,
    "experiment.gamma": 0.41,
    "experiment.delta": 0.3,
    "experiment.eta": 0.2,
    "experiment.m": 100,
    "experiment.depth": 8,
    "experiment.grid_density": 0,
    "experiment.bisection_tolerance": 1e-13,
    "experiment.j_max": 40,
    "experiment.a_grid_points": 64,
    "experiment.ratio_bound": 50.0,
    "experiment.variant": "power",
    "experiment.block_threshold": 5.0,
    "experiment.block_pass_fraction": 0.9,
    "experiment.indicator_count": 16,
    "experiment.typicality_threshold": 5e-3,
    "experiment.typicality_pass_fraction": 0.95,
    "experiment.small_image_d": 1e-3,
    "experiment.ef_ks_pass": 0.02,
    "experiment.ef_kurt_pass": 0.15,
    "experiment.ef_ks_fail": 0.03,
    "experiment.ef_kurt_fail": 0.3,
    "output.directory": "out",
    "output.formats": "json,csv,png",
}

_ENUMS = {
    "experiment.variant": ("power", "power_minus_one"),
}

_OBS_PRESETS = ("cos1", "erdos_fortet", "indicator", "trig")


def _parse_value(raw):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config_text(text):
    """Parse dotted-key assignments; raises ConfigError with line numbers."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, raw = body.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, field=key)
        out[key] = _parse_value(raw)
    if not out and not text.strip():
        raise ConfigError("empty configuration file")
    return out


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config_text(text)


def apply_overrides(cfg, overrides):
    """Apply 'key=value' strings from the CLI."""
    cfg = dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", field=key)
        cfg[key] = _parse_value(raw)
    return cfg


def normalize(cfg):
    """Fill every default explicitly and validate fields."""
    out = {}
    for key, default in DEFAULTS.items():
        out[key] = cfg.get(key, default)

    kind_raw = str(out["family.kind"])
    if kind_raw not in FAMILY_ALIASES:
        raise ConfigError(f"unknown family kind {kind_raw!r}",
                          field="family.kind")
    kind = FAMILY_ALIASES[kind_raw]
    out["family.kind"] = kind
    if out["family.window"] is None:
        out["family.window"] = FAMILY_WINDOW_DEFAULTS[kind]
        if kind == "tent_slope":
            out["family.window"] = min(out["family.window"],
                                       2.0 - float(out["family.s0"]))
    if out["family.x0"] is None:
        out["family.x0"] = FAMILY_X0_DEFAULTS[kind]
    if out["family.x0"] not in ("postcritical", "identity", "affine"):
        raise ConfigError(f"unknown x0 seed kind {out['family.x0']!r}",
                          field="family.x0")

    for key, allowed in _ENUMS.items():
        if out[key] not in allowed:
            raise ConfigError(
                f"{key} must be one of {allowed}, got {out[key]!r}",
                field=key)
    preset = str(out["observable.preset"])
    if preset not in _OBS_PRESETS and not (
            preset.startswith("indicator(") and preset.endswith(")")):
        raise ConfigError(
            f"observable.preset must be one of {_OBS_PRESETS} or "
            f"indicator(p,q), got {preset!r}", field="observable.preset")

    _require(out, "observable.alpha", lambda v: 0.0 < v <= 1.0, "(0, 1]")
    _require(out, "observable.window_a", lambda v: 0.0 < v <= 1.0, "(0, 1]")
    _require(out, "solver.grid_count", lambda v: v >= 16, ">= 16")
    _require(out, "solver.tolerance", lambda v: v > 0, "> 0")
    _require(out, "experiment.checkpoint_base", lambda v: v > 1.0, "> 1")
    _require(out, "experiment.gamma", lambda v: v > 0.4, "> 2/5")

    # floats stay floats even when written as integers
    for key, default in DEFAULTS.items():
        if isinstance(default, float) and isinstance(out[key], int):
            out[key] = float(out[key])
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(out[key], float) and out[key].is_integer():
                out[key] = int(out[key])
    return out


def _require(cfg, key, pred, desc):
    try:
        ok = pred(cfg[key])
    except TypeError:
        ok = False
    if not ok:
        raise ConfigError(f"{key} must be {desc}, got {cfg[key]!r}", field=key)


def serialize(cfg):
    """Canonical text form; parse(serialize(x)) == x for normalized x."""
    lines = [f"{k} = {_format_value(cfg[k])}" for k in sorted(cfg)]
    return "\n".join(lines) + "\n"


# execution machinery, not experiment identity: reports must be
# byte-identical across thread counts and output locations
EXECUTION_KEYS = ("experiment.threads", "output.directory")


def report_snapshot(cfg):
    return {k: v for k, v in cfg.items() if k not in EXECUTION_KEYS}


def config_hash(cfg):
    return hashlib.sha256(
        serialize(report_snapshot(cfg)).encode("utf-8")).hexdigest()[:8]


def build_family(cfg):
    kind = cfg["family.kind"]
    return families.make_family(
        kind,
        s0=float(cfg["family.s0"]),
        beta0=float(cfg["family.beta0"]),
        amplitude=float(cfg["family.amplitude"]),
        window=float(cfg["family.window"]),
        x0=cfg["family.x0"],
        x0_xstar=float(cfg["family.x0_xstar"]),
        x0_kappa=float(cfg["family.x0_kappa"]),
    )


def build_observable(cfg):
    preset = str(cfg["observable.preset"])
    kw = {"alpha": float(cfg["observable.alpha"]),
          "window_A": float(cfg["observable.window_a"])}
    if preset == "cos1":
        return observables.cos1(**kw)
    if preset == "erdos_fortet":
        return observables.erdos_fortet(**kw)
    if preset.startswith("indicator(") and preset.endswith(")"):
        body = preset[len("indicator("):-1]
        try:
            lo, hi = (float(p) for p in body.split(","))
        except ValueError:
            raise ConfigError(
                f"bad indicator preset {preset!r}; expected indicator(p,q)",
                field="observable.preset") from None
        return observables.indicator(lo, hi, **kw)
    if preset == "indicator":
        return observables.indicator(float(cfg["observable.indicator_lo"]),
                                     float(cfg["observable.indicator_hi"]),
                                     **kw)
    # trig: "k:c" comma-separated
    raw = str(cfg["observable.coeffs"])
    pairs = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            k, c = part.split(":")
            pairs.append((int(k), float(c)))
        except ValueError:
            raise ConfigError(
                f"bad trig coefficient {part!r}; expected k:c",
                field="observable.coeffs") from None
    if not pairs:
        raise ConfigError("trig preset needs observable.coeffs",
                          field="observable.coeffs")
    return observables.trig(pairs, **kw)
