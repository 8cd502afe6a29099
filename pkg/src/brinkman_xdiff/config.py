"""Line-oriented run configuration: ``section.key = value``.

Lists are comma-separated, ``#`` starts a comment, and unknown keys are errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ModelParams, make_grid, validate_params
from .dynamics import Problem, initial_profile
from .errors import ConfigurationError, MissingRequired, ParseError, UnknownKey


def _float(text):
    val = float(text)
    if not math.isfinite(val):
        raise ValueError(f"non-finite number {text!r}")
    return val


def _floats(text):
    return [_float(t) for t in text.split(",") if t.strip()]


def _int(text):
    val = float(text)
    if val != int(val):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(val)


def _switch(text):
    low = text.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _word(text):
    return text.strip()


def _dt_max(text):
    return math.inf if text.strip().lower() in ("inf", "none") else _float(text)


# (section, key) -> (converter, required)
SCHEMA = {
    ("grid", "x_left"): (_float, True),
    ("grid", "x_right"): (_float, True),
    ("grid", "M"): (_int, True),
    ("params", "n"): (_int, True),
    ("params", "a"): (_floats, True),
    ("params", "b0"): (_floats, True),
    ("params", "b"): (_floats, True),
    ("params", "sigma"): (_float, True),
    ("params", "eps"): (_float, False),
    ("params", "backend"): (_word, False),
    ("params", "reaction"): (_switch, False),
    ("initial", "kind"): (_word, True),
    ("initial", "value"): (_floats, False),
    ("initial", "base"): (_floats, False),
    ("initial", "amplitude"): (_floats, False),
    ("initial", "center"): (_floats, False),
    ("initial", "width"): (_floats, False),
    ("initial", "left"): (_floats, False),
    ("initial", "right"): (_floats, False),
    ("initial", "position"): (_floats, False),
    ("initial", "path"): (_word, False),
    ("run", "T"): (_float, True),
    ("run", "dt_max"): (_dt_max, False),
    ("run", "output_every"): (_float, False),
    ("experiment", "eps_list"): (_floats, False),
    ("experiment", "delta"): (_float, False),
    ("experiment", "mu"): (_float, False),
    ("experiment", "slack"): (_float, False),
}


@dataclass
class RunConfig:
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    source: Path | None = None
    lines: dict = field(default_factory=dict)

    def echo(self):
        """Plain-data copy of all sections, for manifests."""
        out = {}
        for section in ("grid", "params", "initial", "run", "experiment"):
            items = getattr(self, section)
            if items:
                out[section] = {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v)) for k, v in items.items()}
        return out


def parse_text(text, source=None):
    cfg = RunConfig(source=Path(source) if source is not None else None)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        lhs, rhs = (s.strip() for s in line.split("=", 1))
        if "." not in lhs:
            raise ParseError(f"key {lhs!r} has no section", lineno)
        section, key = lhs.split(".", 1)
        if (section, key) not in SCHEMA:
            raise UnknownKey(f"unknown key {lhs!r}", lineno)
        if (section, key) in cfg.lines:
            raise ParseError(f"duplicate key {lhs!r} (first on line {cfg.lines[(section, key)]})", lineno)
        conv, _ = SCHEMA[(section, key)]
        try:
            value = conv(rhs)
        except ValueError as exc:
            raise ParseError(f"bad value for {lhs}: {exc}", lineno) from None
        getattr(cfg, section)[key] = value
        cfg.lines[(section, key)] = lineno
    for (section, key), (_, required) in SCHEMA.items():
        if required and key not in getattr(cfg, section):
            raise MissingRequired(f"missing required key {section}.{key}")
    return cfg


def parse_config(path):
    path = Path(path)
    return parse_text(path.read_text(encoding="utf-8"), path)


def _err_at(cfg, key, message):
    line = cfg.lines.get(key)
    return ConfigurationError(f"line {line}: {message}" if line else message)


def build_params(cfg):
    pr = cfg.params
    n = pr["n"]
    backend = pr.get("backend", "nonlocal")
    if backend not in ("nonlocal", "local"):
        raise _err_at(cfg, ("params", "backend"), f"unknown backend {backend!r}")
    eps = pr.get("eps", 0.0 if backend == "local" else None)
    if eps is None:
        raise MissingRequired("missing required key params.eps for the nonlocal backend")
    for name, size in (("a", n * n), ("b", n * n), ("b0", n)):
        if len(pr[name]) != size:
            raise _err_at(cfg, ("params", name), f"params.{name} needs {size} values, got {len(pr[name])}")
    p = ModelParams(
        n=n,
        a=np.reshape(pr["a"], (n, n)),
        b0=pr["b0"],
        b=np.reshape(pr["b"], (n, n)),
        sigma=pr["sigma"],
        eps=eps,
        reaction=pr.get("reaction", True),
    )
    return validate_params(p, local=(backend == "local")), backend


def _read_profile_table(path, n):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != n + 1:
        raise ConfigurationError(f"{path}: expected columns x,u1..u{n}, got {data.shape[1]} columns")
    return data[:, 0], data[:, 1:].T


def build_problem(cfg):
    g = cfg.grid
    grid = make_grid(g["x_left"], g["x_right"], g["M"])
    p, backend = build_params(cfg)
    init = dict(cfg.initial)
    kind = init.pop("kind")
    if kind == "csv":
        if "path" not in init:
            raise MissingRequired("initial.kind = csv needs initial.path")
        path = Path(init.pop("path"))
        if not path.is_absolute() and cfg.source is not None:
            path = cfg.source.parent / path
        if not path.exists():
            raise _err_at(cfg, ("initial", "path"), f"initial profile file {path} does not exist")
        xs, vals = _read_profile_table(path, p.n)
        u0 = initial_profile(grid, p.n, "table", x=xs, values=vals)
    else:
        if kind == "gaussian" and "center" not in init:
            init["center"] = 0.5 * (grid.x_left + grid.x_right)
        try:
            u0 = initial_profile(grid, p.n, kind, **init)
        except TypeError as exc:
            raise _err_at(cfg, ("initial", "kind"), f"bad parameters for profile {kind!r}: {exc}") from None
    run = cfg.run
    return Problem(
        grid=grid,
        params=p,
        u0=u0,
        T=run["T"],
        dt_max=run.get("dt_max", math.inf),
        output_every=run.get("output_every", run["T"]),
        backend=backend,
    )
