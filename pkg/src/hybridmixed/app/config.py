"""Study configuration files.

INI syntax with a single ``[study]`` section::

    [study]
    type = precond              # converge | precond
    grid = uniform              # uniform | crisscross | hct
    resolutions = 4, 8, 16      # values of 1/h, strictly increasing
    k = 2
    mu = 0.5
    lam = 1.0                   # converge studies
    nu = 0.49, 0.4999           # Poisson ratios (precond studies)
    preconditioners = one-level:vertex-patches, two-level::additive
    tol = 1e-6
    maxit = 500
    load_lam = 1.0              # or "none"
    quad_boost = 0
    output = iterations.csv

Preconditioner entries read ``kind[:block_type[:mode]]`` with kind in
diagonal, one-level, two-level, multilevel; block_type in edges, elements,
vertex-patches, coarse-vertex-patches; mode in additive,
sym-multiplicative.
"""

from __future__ import annotations

import configparser

from .studies import StudyConfig


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in text.replace(",", " ").split()]


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


_FIELDS = {
    "type": ("study", str),
    "grid": ("grid", str),
    "resolutions": ("resolutions", _ints),
    "k": ("k", int),
    "mu": ("mu", float),
    "lam": ("lam", _opt_float),
    "nu": ("nus", _floats),
    "preconditioners": ("preconditioners", lambda s: [p.strip() for p in s.split(",") if p.strip()]),
    "solver": ("solver", str),
    "tol": ("tol", float),
    "maxit": ("maxit", int),
    "load_lam": ("load_lam", _opt_float),
    "quad_boost": ("quad_boost", int),
    "output": ("output", str),
    "allow_incompatible": ("allow_incompatible", lambda s: s.strip().lower() in ("1", "true", "yes")),
}


def parse_config(text):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "study" not in cp:
        raise ConfigError("missing [study] section")
    cfg = StudyConfig()
    for key, raw in cp["study"].items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        attr, conv = _FIELDS[key]
        try:
            setattr(cfg, attr, conv(raw))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    if cfg.study not in ("converge", "precond"):
        raise ConfigError(f"unknown study type {cfg.study!r}")
    try:
        return cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
