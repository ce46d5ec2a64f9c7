"""Unoriented angular error metrics and benchmark reports."""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import atomic_write_text
from .errors import ConfigError, LengthMismatch, UnitVectorViolation

DEFAULT_TAUS = (5.0, 10.0)
UNIT_SLACK = 1e-6
# |dot| of a unit vector with itself lands a few ulp below 1, which arccos turns into
# ~1e-6 degrees; such values are snapped to 1 so identical inputs score exactly zero.
ULP_SNAP = 1.0 - 8 * np.finfo(np.float64).eps


def angular_errors(preds, gts) -> np.ndarray:
    """Per-point ``arccos(|n . n_hat|)`` in degrees."""
    p = np.asarray(preds, dtype=np.float64).reshape(-1, 3)
    g = np.asarray(gts, dtype=np.float64).reshape(-1, 3)
    if p.shape != g.shape:
        raise LengthMismatch(f"{len(p)} predictions vs {len(g)} ground-truth normals")
    dot = np.abs(np.sum(p * g, axis=1))
    if np.any(dot > 1.0 + UNIT_SLACK):
        raise UnitVectorViolation(f"|dot| up to {dot.max():.9g}; inputs are not unit vectors")
    dot = np.where(dot >= ULP_SNAP, 1.0, dot)
    return np.degrees(np.arccos(dot))


def rmse(preds, gts) -> float:
    err = angular_errors(preds, gts)
    if len(err) == 0:
        raise LengthMismatch("no points")
    return float(np.sqrt(np.mean(err * err)))


def pgp(preds, gts, tau_deg: float) -> float:
    if not tau_deg > 0:
        raise ConfigError("tau must be positive")
    err = angular_errors(preds, gts)
    if len(err) == 0:
        raise LengthMismatch("no points")
    return float(100.0 * np.mean(err < tau_deg))


_NOISE = re.compile(r"_noise(?:_white)?_([0-9.eE+-]+)")


def category(name: str) -> str:
    """Table-style column for a shape name (PCPNet and synthetic naming both)."""
    if name.endswith("_ddist_minmax_layers") or name.endswith("_stripes"):
        return "stripes"
    if name.endswith("_ddist_minmax") or name.endswith("_gradient"):
        return "gradient"
    m = _NOISE.search(name)
    if m:
        return f"noise_{float(m.group(1)):g}"
    return "none"


@dataclass
class ShapeRow:
    name: str
    rmse_deg: float
    pgp: dict
    runtime_ms: float = 0.0


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)
    taus: tuple = DEFAULT_TAUS
    config: dict = field(default_factory=dict)

    def add(self, name: str, preds, gts, runtime_ms: float = 0.0) -> ShapeRow:
        row = ShapeRow(
            name,
            rmse(preds, gts),
            {f"{t:g}": pgp(preds, gts, t) for t in self.taus},
            float(runtime_ms),
        )
        self.rows.append(row)
        return row

    def aggregates(self) -> dict:
        """Mean RMSE/PGP overall and per category; independent of row order."""
        rows = sorted(self.rows, key=lambda r: r.name)
        if not rows:
            return {"mean_rmse_deg": None, "categories": {}}
        groups: dict = {}
        for r in rows:
            groups.setdefault(category(r.name), []).append(r)
        cats = {
            c: {
                "count": len(rs),
                "rmse_deg": float(np.mean([r.rmse_deg for r in rs])),
                "pgp": {k: float(np.mean([r.pgp[k] for r in rs])) for k in rs[0].pgp},
            }
            for c, rs in sorted(groups.items())
        }
        return {
            "mean_rmse_deg": float(np.mean([r.rmse_deg for r in rows])),
            "mean_pgp": {k: float(np.mean([r.pgp[k] for r in rows])) for k in rows[0].pgp},
            "category_average_rmse_deg": float(np.mean([c["rmse_deg"] for c in cats.values()])),
            "categories": cats,
        }

    def to_dict(self) -> dict:
        return {
            "taus": list(self.taus),
            "rows": [asdict(r) for r in self.rows],
            "aggregates": self.aggregates(),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls([ShapeRow(**r) for r in d["rows"]], tuple(d["taus"]), d.get("config", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["shape", "rmse_deg", *[f"pgp{t:g}" for t in self.taus], "runtime_ms"])
        for r in self.rows:
            w.writerow([r.name, repr(r.rmse_deg), *[repr(v) for v in r.pgp.values()], repr(r.runtime_ms)])
        return buf.getvalue()


def emit_report(report: MetricReport, fmt: str, path) -> None:
    if fmt == "csv":
        atomic_write_text(path, report.to_csv())
    elif fmt == "json":
        atomic_write_text(path, json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        raise ConfigError(f"unknown report format {fmt!r}")


def load_report(path) -> MetricReport:
    with open(path) as fh:
        return MetricReport.from_dict(json.load(fh))
