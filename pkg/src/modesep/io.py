"""Data interchange: binary matrix format, CSV, and the external score contract.

Binary matrix format (little-endian), 8-field header then row-major float64:

    magic   4 bytes  b"MSTB"
    version u32      1
    n_traj  u64
    n_snap  u64
    dim     u64
    dt      f64      physical time between stored snapshots
    sigma   f64      sigma_f^2 of the run (0 when not applicable)
    reserved u64     0

Plain sample matrices are stored with n_snap = 1.  CSV files are headerless
float rows; exports use repr's shortest round-trip formatting so re-ingesting
reproduces the float64 values bit-exactly.
"""

from __future__ import annotations

import json
import struct
import subprocess

import numpy as np

from .dynamics import TrajectoryEnsemble

__all__ = [
    "MatrixFormatError",
    "write_ensemble",
    "read_ensemble",
    "write_samples",
    "read_samples",
    "write_csv",
    "read_csv",
    "format_row",
    "write_autocov_series",
    "read_autocov_matrices",
    "SubprocessScore",
]

_MAGIC = b"MSTB"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQQddQ")


class MatrixFormatError(ValueError):
    pass


def _write_array(path, data, dt, sigma):
    data = np.ascontiguousarray(data, dtype="<f8")
    n, s, d = data.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, n, s, d, float(dt), float(sigma), 0))
        fh.write(data.tobytes())


def _read_array(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise MatrixFormatError(f"{path}: truncated header")
        magic, version, n, s, d, dt, sigma, _ = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
        if version != _VERSION:
            raise MatrixFormatError(f"{path}: unsupported version {version}, expected {_VERSION}")
        payload = np.fromfile(fh, dtype="<f8", count=n * s * d)
    if payload.size != n * s * d:
        raise MatrixFormatError(f"{path}: truncated payload")
    return payload.reshape(n, s, d), dt, sigma


def write_ensemble(path, ens: TrajectoryEnsemble):
    _write_array(path, ens.data, ens.dt_snapshot, ens.sigma_f_sq)


def read_ensemble(path, mean_used=None):
    data, dt, sigma = _read_array(path)
    if mean_used is None:
        mean_used = data.reshape(-1, data.shape[2]).mean(axis=0)
    return TrajectoryEnsemble(data=data, dt_snapshot=dt, mean_used=mean_used, sigma_f_sq=sigma)


def write_samples(path, samples):
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    _write_array(path, samples[:, None, :], 0.0, 0.0)


def read_samples(path):
    data, _, _ = _read_array(path)
    return data.reshape(data.shape[0] * data.shape[1], data.shape[2])


def format_row(values):
    """One CSV row, floats at full round-trip precision, strings verbatim."""
    return ",".join(v if isinstance(v, str) else repr(float(v)) for v in values)


def write_autocov_series(csv_path, series, matrices_path=None):
    """Export a lag series as (tau, rho) CSV, optionally dumping the per-lag
    matrices in the binary format (stored as an L x d x d stack)."""
    write_csv(csv_path, zip(series.grid.physical, series.rho), header=["tau", "rho"])
    if matrices_path is not None:
        if series.C is None:
            raise ValueError("series does not retain matrices")
        _write_array(matrices_path, np.stack(series.C), series.grid.dt_snapshot, 0.0)


def read_autocov_matrices(path):
    """Matrix stack written by write_autocov_series -> (L, d, d) array."""
    data, _, _ = _read_array(path)
    return data


def write_csv(path, rows, header=None):
    """Write rows (any iterable of value sequences) with shortest-repr floats."""
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(format_row(row) + "\n")


def read_csv(path, expect_columns=None, chunk_lines=100000):
    """Headerless float CSV -> (n, d) array, parsed in bounded-memory chunks.

    Raises on ragged rows, NaN, or non-numeric fields, reporting the line
    number.  Peak memory is the output array plus one chunk of parsed rows.
    """
    chunks = []
    width = expect_columns
    lineno = 0
    with open(path) as fh:
        buf = []
        for line in fh:
            lineno += 1
            line = line.strip()
            if not line:
                continue
            buf.append(line)
            if len(buf) >= chunk_lines:
                chunks.append(_parse_chunk(buf, lineno, width))
                width = chunks[-1].shape[1]
                buf = []
        if buf:
            chunks.append(_parse_chunk(buf, lineno, width))
    if not chunks:
        raise MatrixFormatError(f"{path}: empty file")
    return np.concatenate(chunks, axis=0)


def _parse_chunk(lines, end_lineno, width):
    start = end_lineno - len(lines) + 1
    rows = []
    for off, line in enumerate(lines):
        fields = line.split(",")
        if width is not None and len(fields) != width:
            raise MatrixFormatError(
                f"line {start + off}: expected {width} columns, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise MatrixFormatError(f"line {start + off}: {exc}") from exc
        width = len(fields)
    arr = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
        raise MatrixFormatError(f"line {start + bad}: non-finite value")
    return arr


class SubprocessScore:
    """Score oracle served by an external process over standard streams.

    Protocol: one JSON object per line on stdin, {"x": [..]}, answered by one
    JSON object per line on stdout, {"grad": [..]}.  Requests for a batch are
    written before responses are read, so pipelined servers work.  Anything
    that can evaluate grad log f (a pretrained denoiser, a foreign-language
    estimator) can be wired in this way.
    """

    def __init__(self, command, dim):
        self.dim = int(dim)
        self._proc = subprocess.Popen(command, stdin=subprocess.PIPE,
                                      stdout=subprocess.PIPE, text=True, bufsize=1)

    def score(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        if pts.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {pts.shape[1]} != {self.dim}")
        payload = "".join(json.dumps({"x": row.tolist()}) + "\n" for row in pts)
        self._proc.stdin.write(payload)
        self._proc.stdin.flush()
        out = np.empty_like(pts)
        for i in range(pts.shape[0]):
            line = self._proc.stdout.readline()
            if not line:
                raise RuntimeError("score subprocess closed its output stream")
            out[i] = np.asarray(json.loads(line)["grad"], dtype=np.float64)
        return out[0] if single else out

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
