"""Monte Carlo law of the self-normalized limit variable and its quantile tables.

The limit variable is

    W = B(1) / sqrt( int lambda^2 (B(lambda) - lambda B(1))^2 nu(d lambda) ),

with B a standard Brownian motion. Its quantiles depend only on nu.

Cache file layout (little endian)::

    offset  size  content
    0       8     magic b"RELEIGW\\x00"
    8       4     uint32 format version
    12      4     uint32 header length H
    16      H     UTF-8 JSON header: format_version, nu_kind, lower, L, R, seed,
                  grid_hash, redraws, block_size
    16 + H  8 R   float64 sorted draws of W

Files are named ``w-<key>.bin`` where ``key`` is the first 20 hex digits of
the SHA-256 of the canonical JSON of (format version, nu descriptor, L, R,
seed, block size). A different format version is treated as a cache miss.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .covop import partial_count
from .measure import NuMeasure
from .rng import normals, substream

FORMAT_VERSION = 1
MAGIC = b"RELEIGW\x00"
BLOCK_SIZE = 2000
MIN_PATH_STEPS = 500
MIN_REPLICATES = 10_000
DEFAULT_PATH_STEPS = 1000
DEFAULT_REPLICATES = 100_000
CACHE_ENV = "RELEIG_CACHE_DIR"


@dataclass(frozen=True, eq=False)
class QuantileTable:
    nu: NuMeasure
    path_grid_size: int
    replicates: int
    seed: int
    samples: np.ndarray
    redraws: int = 0

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if np.any(np.diff(s) < 0):
            s = np.sort(s)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def key(self) -> str:
        return table_key(self.nu, self.path_grid_size, self.replicates, self.seed)

    def quantile(self, p: float) -> float:
        return quantile(self, p)

    def p_value(self, w: float) -> float:
        return p_value(self, w)

    def q(self, probs=(0.90, 0.95, 0.99)) -> dict[float, float]:
        return {float(p): quantile(self, p) for p in probs}


def _grid_hash(nu: NuMeasure) -> str:
    return hashlib.sha256(np.asarray(nu.lambda_grid, dtype="<f8").tobytes()).hexdigest()


def table_key(nu: NuMeasure, L: int, R: int, seed: int) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "nu": nu.descriptor(),
        "L": int(L),
        "R": int(R),
        "seed": int(seed),
        "block_size": BLOCK_SIZE,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:20]


def _w_from_paths(paths: np.ndarray, idx: np.ndarray, lambdas: np.ndarray):
    """W for each row of ``paths`` (B at k/L, k = 1..L); returns (W, denominators)."""
    b1 = paths[:, -1]
    at = np.where(idx[None, :] > 0, paths[:, np.maximum(idx - 1, 0)], 0.0)
    bridge = at - lambdas[None, :] * b1[:, None]
    denom = np.sqrt(np.mean(lambdas[None, :] ** 2 * bridge**2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return b1 / denom, denom


def _simulate_block(nu: NuMeasure, L: int, seed: int, block: int, size: int):
    lambdas = np.asarray(nu.lambda_grid)
    idx = np.array([partial_count(L, lam) for lam in lambdas])
    gen = substream(seed, block)
    paths = np.cumsum(normals(gen, (size, L)) * np.sqrt(1.0 / L), axis=1)
    w, denom = _w_from_paths(paths, idx, lambdas)
    redraws = 0
    for i in np.flatnonzero(denom == 0):
        attempt = 0
        while denom[i] == 0:
            attempt += 1
            redraws += 1
            g = substream(seed, block, int(i), attempt)
            path = np.cumsum(normals(g, (1, L)) * np.sqrt(1.0 / L), axis=1)
            wi, di = _w_from_paths(path, idx, lambdas)
            w[i], denom[i] = wi[0], di[0]
    return w, redraws


def simulate_W(
    nu: NuMeasure | None = None,
    L: int = DEFAULT_PATH_STEPS,
    R: int = DEFAULT_REPLICATES,
    seed: int = 0,
    workers: int = 1,
) -> QuantileTable:
    """Simulate R draws of W from Brownian paths on {k / L}.

    Replicates are generated in fixed blocks of ``BLOCK_SIZE``, each block from
    its own substream keyed by (seed, block index), so the table is identical
    for any ``workers``.
    """
    nu = nu if nu is not None else NuMeasure()
    if L < MIN_PATH_STEPS:
        raise ValueError(f"path grid needs L >= {MIN_PATH_STEPS}, got {L}")
    if R < MIN_REPLICATES:
        raise ValueError(f"need R >= {MIN_REPLICATES} replicates, got {R}")
    n_blocks = -(-R // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, R - b * BLOCK_SIZE) for b in range(n_blocks)]

    def run(b):
        return _simulate_block(nu, L, seed, b, sizes[b])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    draws = np.concatenate([p[0] for p in parts])
    redraws = sum(p[1] for p in parts)
    return QuantileTable(nu, int(L), int(R), int(seed), np.sort(draws), redraws)


def quantile(table: QuantileTable, p: float) -> float:
    """Empirical quantile with linear (type 7) interpolation."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return float(np.quantile(table.samples, p, method="linear"))


def p_value(table: QuantileTable, w: float) -> float:
    """Fraction of simulated draws strictly greater than w."""
    if np.isnan(w):
        raise ValueError("statistic is NaN")
    if w == np.inf:
        return 0.0
    if w == -np.inf:
        return 1.0
    s = table.samples
    return float(s.size - np.searchsorted(s, w, side="right")) / s.size


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "releig"


def cache_path(cache_dir, nu: NuMeasure, L: int, R: int, seed: int) -> Path:
    return Path(cache_dir) / f"w-{table_key(nu, L, R, seed)}.bin"


def save_table(table: QuantileTable, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format_version": FORMAT_VERSION,
        "nu_kind": table.nu.kind,
        "lower": table.nu.lower,
        "L": table.path_grid_size,
        "R": table.replicates,
        "seed": table.seed,
        "grid_hash": _grid_hash(table.nu),
        "redraws": table.redraws,
        "block_size": BLOCK_SIZE,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(np.asarray(table.samples, dtype="<f8").tobytes())
    os.replace(tmp, path)
    return path


def read_header(path) -> dict | None:
    """Header of a cache file, or None when the file is foreign or of another version."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            return None
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            return None
        return json.loads(fh.read(hlen).decode("utf-8"))


def load_table(path, nu: NuMeasure) -> QuantileTable | None:
    """Load a cached table built for ``nu``; None on version or grid mismatch."""
    path = Path(path)
    header = read_header(path)
    if header is None or header["grid_hash"] != _grid_hash(nu) or header["lower"] != nu.lower:
        return None
    raw = path.read_bytes()
    hlen = struct.unpack("<I", raw[12:16])[0]
    samples = np.frombuffer(raw[16 + hlen:], dtype="<f8").astype(float)
    if samples.size != header["R"]:
        return None
    return QuantileTable(nu, header["L"], header["R"], header["seed"], samples, header["redraws"])


def get_table(
    nu: NuMeasure | None = None,
    L: int = DEFAULT_PATH_STEPS,
    R: int = DEFAULT_REPLICATES,
    seed: int = 0,
    cache_dir=None,
    workers: int = 1,
) -> tuple[QuantileTable, bool]:
    """Cached simulate_W; returns (table, cache_hit)."""
    nu = nu if nu is not None else NuMeasure()
    path = cache_path(cache_dir if cache_dir is not None else default_cache_dir(), nu, L, R, seed)
    if path.exists():
        table = load_table(path, nu)
        if table is not None:
            return table, True
    table = simulate_W(nu, L, R, seed, workers)
    save_table(table, path)
    return table, False
