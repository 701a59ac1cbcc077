"""Readers and writers for the comma-separated data files.

All files may start with ``#`` comment lines. Written files carry a
metadata header (tool version, seed, config hash) as such comments.
Floats are written with ``repr`` so a file round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, IngestionError
from .gibbs import Observations, PosteriorSample, close_states, derived_quantities
from .network import ReactionNetwork
from .rng import StreamState


def _data_lines(fh):
    for line in fh:
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield stripped


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(_data_lines(fh)))
    if not rows:
        raise IngestionError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    body = [[c.strip() for c in r] for r in rows[1:]]
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise IngestionError(f"{path}: row {k} has {len(r)} fields, header has {len(header)}")
    return header, body


def load_observations(path, network: ReactionNetwork) -> Observations:
    """Read ``time,<species...>`` rows; missing species are closed by conservation laws."""
    header, body = read_table(path)
    if not header or header[0] != "time":
        raise IngestionError(f"{path}: first column must be 'time'")
    if len(set(header)) != len(header):
        raise IngestionError(f"{path}: duplicate columns")
    if len(body) < 2:
        raise IngestionError("need at least 2 observations")
    try:
        times = np.array([float(r[0]) for r in body])
        cols = {name: np.array([int(r[k]) for r in body]) for k, name in enumerate(header) if k > 0}
    except ValueError as exc:
        raise IngestionError(f"{path}: non-numeric entry ({exc})") from exc
    if np.any(np.diff(times) <= 0):
        raise IngestionError(f"{path}: observation times must be strictly increasing")
    for name, col in cols.items():
        if np.any(col < 0):
            raise IngestionError(f"{path}: negative counts for species {name}")
    states = close_states(network, cols)
    obs = Observations(times, states)
    try:
        obs.validate(network)
    except Exception as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    return obs


def metadata_lines(seed, config_hash, extra=None) -> list[str]:
    lines = [f"# tool: kinbayes {__version__}", f"# seed: {seed}", f"# config_hash: {config_hash}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return lines


def config_hash(items: dict) -> str:
    text = "\n".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def posterior_header(m: int) -> str:
    return ",".join(["iteration"] + [f"theta_{j + 1}" for j in range(m)] + ["K_D", "K_M"])


def write_posterior(path, samples, m, meta_lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in meta_lines:
            fh.write(line + "\n")
        fh.write(posterior_header(m) + "\n")
        for s in samples:
            vals = [repr(float(v)) for v in s.theta] + [repr(s.K_D), repr(s.K_M)]
            fh.write(f"{s.iteration}," + ",".join(vals) + "\n")


def write_streams(path, samples, meta_lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in meta_lines:
            fh.write(line + "\n")
        fh.write("iteration,interval,stream_state\n")
        for s in samples:
            for i, st in enumerate(s.stream_states):
                fh.write(f"{s.iteration},{i},{st.encode()}\n")


def read_posterior(path) -> tuple[list[str], np.ndarray]:
    header, body = read_table(path)
    try:
        data = np.array([[float(c) for c in r] for r in body]) if body else np.empty((0, len(header)))
    except ValueError as exc:
        raise IngestionError(f"{path}: non-numeric entry ({exc})") from exc
    return header, data


def load_samples(posterior_path, streams_path) -> list[PosteriorSample]:
    """Rebuild posterior samples (without statistics) from the two output files."""
    header, data = read_posterior(posterior_path)
    theta_cols = [k for k, h in enumerate(header) if h.startswith("theta_")]
    _, body = read_table(streams_path)
    states: dict[int, dict[int, StreamState]] = {}
    for it, interval, token in body:
        states.setdefault(int(it), {})[int(interval)] = StreamState.decode(token)
    samples = []
    for row in data:
        it = int(row[0])
        theta = row[theta_cols]
        kd, km = derived_quantities(theta)
        per = states.get(it)
        if per is None:
            raise IngestionError(f"{streams_path}: no stream states for iteration {it}")
        samples.append(PosteriorSample(it, theta, kd, km, tuple(per[i] for i in sorted(per))))
    return samples


def read_key_value(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq or not key.strip():
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            out[key.strip()] = value.strip()
    return out


def rows_to_text(lines) -> str:
    buf = io.StringIO()
    for line in lines:
        buf.write(line + "\n")
    return buf.getvalue()


def write_text(path, lines):
    Path(path).write_text(rows_to_text(lines), encoding="utf-8")
