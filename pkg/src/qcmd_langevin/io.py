"""Trajectory files: CSV for inspection, little-endian float64 stream for volume."""

import csv
import json
import struct

import numpy as np

from .errors import ContractViolation

MAGIC = b"QCMDTRJ1"


def write_trajectory_csv(path, record):
    """Columns ``tau, X0.., p0.., energy`` for a single trajectory."""
    X = np.asarray(record.X).reshape(len(record.times), -1)
    p = np.asarray(record.p).reshape(len(record.times), -1)
    E = np.asarray(record.energy).reshape(len(record.times), -1)[:, 0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau"] + [f"X{k}" for k in range(X.shape[1])]
                   + [f"p{k}" for k in range(p.shape[1])] + ["energy"])
        for i, t in enumerate(record.times):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in X[i]]
                       + [repr(float(v)) for v in p[i]] + [repr(float(E[i]))])


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    nx = sum(h.startswith("X") for h in header)
    return {"tau": data[:, 0], "X": data[:, 1:1 + nx], "p": data[:, 1 + nx:1 + 2 * nx],
            "energy": data[:, -1]}


def write_trajectory_binary(path, record, model_hash=""):
    """Header ``MAGIC, uint32 length, JSON``; then rows ``tau, X.., p.., energy`` as '<f8'."""
    n = len(record.times)
    X = np.asarray(record.X, dtype="<f8").reshape(n, -1)
    p = np.asarray(record.p, dtype="<f8").reshape(n, -1)
    E = np.asarray(record.energy, dtype="<f8").reshape(n, -1)[:, :1]
    data = np.hstack([np.asarray(record.times, dtype="<f8")[:, None], X, p, E]).astype("<f8")
    header = json.dumps({"model_hash": model_hash, "rows": n, "dof": X.shape[1],
                         "columns": data.shape[1], "meta": _plain(record.meta)},
                        sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(data.tobytes())


def read_trajectory_binary(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ContractViolation("not a trajectory stream")
        (size,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(size))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(header["rows"], header["columns"])
    d = header["dof"]
    return header, {"tau": data[:, 0], "X": data[:, 1:1 + d], "p": data[:, 1 + d:1 + 2 * d],
                    "energy": data[:, -1]}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
