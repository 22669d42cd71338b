"""JSON file formats: sparse tensor/pencil files, certificates, and result
records.  Everything is human-diffable; complex numbers are {re, im} pairs and
matrices are row-major nested lists."""

from __future__ import annotations

import json

import numpy as np

from .apps import MatrixPencil
from .errors import ValidationError
from .geometry import BoundaryCertificate


def tensor_to_record(v, kind="tensor"):
    """Sparse JSON record of a dense tensor (zero entries omitted)."""
    v = np.asarray(v, dtype=complex)
    entries = []
    for idx in np.argwhere(v != 0):
        z = v[tuple(idx)]
        entries.append({"idx": [int(i) for i in idx], "re": float(z.real),
                        "im": float(z.imag)})
    return {"kind": kind, "dims": [int(n) for n in v.shape], "entries": entries}


def tensor_from_record(rec):
    dims = rec.get("dims")
    if not dims or any(int(n) <= 0 for n in dims):
        raise ValidationError(f"bad dims field: {dims!r}")
    v = np.zeros(tuple(int(n) for n in dims), dtype=complex)
    seen = set()
    for e in rec.get("entries", []):
        idx = tuple(int(i) for i in e["idx"])
        if len(idx) != len(dims) or any(
            not 0 <= i < n for i, n in zip(idx, dims)
        ):
            raise ValidationError(f"index {list(idx)} out of range for dims {dims}")
        if idx in seen:
            raise ValidationError(f"duplicate index {list(idx)}")
        seen.add(idx)
        v[idx] = float(e.get("re", 0.0)) + 1j * float(e.get("im", 0.0))
    return v


def pencil_to_record(A):
    return tensor_to_record(A.tensor(), kind="pencil")


def pencil_from_record(rec):
    v = tensor_from_record(rec)
    if v.ndim != 3 or v.shape[0] != v.shape[1]:
        raise ValidationError(
            f"pencil file must have dims (n, n, m), got {list(v.shape)}"
        )
    return MatrixPencil([v[:, :, k] for k in range(v.shape[2])])


def load_instance(path):
    """Read a tensor or pencil file; returns ('tensor', ndarray) or
    ('pencil', MatrixPencil)."""
    with open(path) as fh:
        rec = json.load(fh)
    kind = rec.get("kind", "tensor")
    if kind == "pencil":
        return kind, pencil_from_record(rec)
    if kind == "tensor":
        return kind, tensor_from_record(rec)
    raise ValidationError(f"unknown file kind {kind!r}")


def save_record(rec, path=None):
    text = json.dumps(rec, sort_keys=True, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def _matrix_to_json(M):
    M = np.asarray(M, dtype=complex)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def _matrix_from_json(d):
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def certificate_to_record(cert):
    if cert is None:
        return None
    return {
        "euclid_dir": np.asarray(cert.euclid_dir, dtype=float).tolist(),
        "bases": [_matrix_to_json(k) for k in cert.bases],
        "weights": [np.asarray(w, dtype=float).tolist() for w in cert.weights],
    }


def certificate_from_record(rec):
    try:
        return BoundaryCertificate(
            euclid_dir=np.asarray(rec["euclid_dir"], dtype=float),
            bases=[_matrix_from_json(d) for d in rec["bases"]],
            weights=[np.asarray(w, dtype=float) for w in rec["weights"]],
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed certificate record: {exc}")


def trace_summary(trace, max_samples=50):
    """Downsampled (t, Q, f, R) table from a flow trace."""
    samples = trace.samples
    if len(samples) > max_samples:
        idx = np.unique(np.linspace(0, len(samples) - 1, max_samples).astype(int))
        samples = [samples[i] for i in idx]
    return [
        {"t": s.t, "q_value": s.q_value, "f_value": s.f_value, "r_cum": s.r_cum}
        for s in samples
    ]


def result_record(command, config, result=None, extra=None):
    """Assemble the canonical result record for a CLI run."""
    from . import __version__

    rec = {
        "command": command,
        "config": {
            "max_iters": config.max_iters,
            "step_rule": config.step_rule,
            "step_size": config.step_size,
            "smoothing": config.smoothing,
            "smoothing_schedule": config.smoothing_schedule,
            "ode_step": config.ode_step,
            "tol_stall": config.tol_stall,
            "stall_window": config.stall_window,
            "seed": config.seed,
            "record_every": config.record_every,
            "shift": config.shift,
            "renorm_every": config.renorm_every,
        },
        "versions": {"qflow": __version__},
    }
    if result is not None:
        rec["result"] = {
            "primal_value": result.primal_value,
            "dual_value": result.dual_value,
            "gap": result.gap,
            "iterations": result.iterations,
            "status": result.status,
            "rank": result.rank,
            "rank_lower": result.rank_lower,
            "rank_upper": result.rank_upper,
            "value": result.value,
            "spectra": [np.asarray(s).tolist() for s in result.spectra]
            if result.spectra is not None
            else None,
        }
        rec["certificate"] = certificate_to_record(result.certificate)
        if result.trace is not None:
            rec["trace"] = trace_summary(result.trace)
    if extra:
        rec.update(extra)
    return rec
