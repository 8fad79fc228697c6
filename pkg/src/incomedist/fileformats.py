"""Text formats: key-value configs, delimited tables, sample files, and
run manifests.

Data files carry incomes as shortest round-trip decimal text (bit-exact
on reload); report and table numerics use 12 significant digits for
diff-able output. All writes are atomic (temp file then rename).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

import numpy as np

from .empirical import IncomeSample, Source
from .errors import ParseError, PreconditionError
from .model import EffectiveParams, MicroParams

__all__ = [
    "atomic_write_text",
    "read_config",
    "write_key_value",
    "write_table",
    "write_samples_csv",
    "format_sig",
    "sha256_file",
    "effective_params_from_config",
    "micro_params_from_config",
    "write_manifest",
]


def atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_config(path) -> dict:
    """key = value lines; blank lines and # comments ignored."""
    out: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError(f"{path}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def format_sig(x) -> str:
    """12-significant-digit decimal text for report and table output."""
    return "%.12g" % float(x)


def write_key_value(path, mapping) -> None:
    lines = [f"{k} = {v if isinstance(v, str) else format_sig(v)}\n"
             for k, v in mapping.items()]
    atomic_write_text(path, "".join(lines))


def write_table(path, header, rows, delimiter: str = "\t") -> None:
    parts = [delimiter.join(header) + "\n"]
    for row in rows:
        parts.append(delimiter.join(
            cell if isinstance(cell, str) else format_sig(cell) for cell in row
        ) + "\n")
    atomic_write_text(path, "".join(parts))


def write_samples_csv(path, samples) -> None:
    """income,source,year rows; incomes as exact round-trip decimals."""
    lines = ["income,source,year\n"]
    for s in samples:
        if isinstance(s, IncomeSample):
            year = "" if s.year is None else str(s.year)
            lines.append(f"{s.income!r},{s.source.value},{year}\n")
        else:
            lines.append(f"{float(s)!r},{Source.SURVEY.value},\n")
    atomic_write_text(path, "".join(lines))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _cfg_float(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ParseError(f"missing required key {key!r}")
        return float(default)
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ParseError(f"key {key!r}: {exc}") from exc


def effective_params_from_config(cfg) -> EffectiveParams:
    """Read T, m0, m1, alpha, alpha1, m_init (and optional T1) keys."""
    T = _cfg_float(cfg, "T")
    return EffectiveParams(
        T=T,
        T1=_cfg_float(cfg, "T1", T),
        m0=_cfg_float(cfg, "m0"),
        m1=_cfg_float(cfg, "m1"),
        alpha=_cfg_float(cfg, "alpha"),
        alpha1=_cfg_float(cfg, "alpha1"),
        m_init=_cfg_float(cfg, "m_init"),
    )


def micro_params_from_config(cfg) -> MicroParams:
    """Read A0, A0p, a, ap, B0, b, m1, m_init keys."""
    return MicroParams(
        A0=_cfg_float(cfg, "A0"),
        A0p=_cfg_float(cfg, "A0p"),
        a=_cfg_float(cfg, "a"),
        ap=_cfg_float(cfg, "ap"),
        B0=_cfg_float(cfg, "B0"),
        b=_cfg_float(cfg, "b"),
        m1=_cfg_float(cfg, "m1"),
        m_init=_cfg_float(cfg, "m_init"),
    )


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def write_manifest(path, *, command: str, parameters: dict, inputs: dict,
                   outputs, seed, version: str, argv) -> None:
    """Reproducibility record: resolved parameters, input digests, seed,
    version, and the exact argv. Re-running the argv against byte-equal
    inputs reproduces every output bit for bit."""
    if not isinstance(command, str) or not command:
        raise PreconditionError("manifest needs a command name")
    doc = {
        "command": command,
        "parameters": {k: _jsonable(v) for k, v in parameters.items()},
        "inputs": {name: sha256_file(p) for name, p in inputs.items()},
        "outputs": sorted(outputs),
        "seed": _jsonable(seed),
        "version": version,
        "argv": list(argv),
    }
    atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
