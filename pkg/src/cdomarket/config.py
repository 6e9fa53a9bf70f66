"""YAML model configuration and dataset loading for the CLI."""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import yaml

from .bootstrap import QuoteSurface
from .driver import (DiscreteLoss, DiscreteMarket, DriverSegment,
                     DriverSpec, GaussianMarket, JumpComponent, PointLoss,
                     PointMarket, UniformLoss, UniformMarket, no_loss,
                     no_market)
from .errors import DataError
from .model import (ConstantContagion, MarketModel, NoContagion,
                    PiecewiseConst, SpreadDrift, StepContagion, VolStructure)
from .pricing import STCDOSpec
from .tenor import (LevelGrid, TenorStructure, read_defaultable_csv,
                    read_riskfree_csv, snapshot_from_curves)

__all__ = ["load_model", "load_tranche", "load_quotes", "config_digest"]


def config_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_yaml(path: Path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = (f"{path}:{mark.line + 1}:{mark.column + 1}"
                 if mark is not None else str(path))
        raise DataError(f"{where}: cannot parse config: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: config must be a mapping")
    return doc


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise DataError(f"{where}: missing required key {key!r}")
    return doc[key]


def _market_marks(doc: dict, d: int, where: str):
    family = _require(doc, "family", where)
    if family == "none":
        return no_market(d)
    if family == "point":
        return PointMarket(tuple(float(v) for v in _require(doc, "value", where)))
    if family == "discrete":
        return DiscreteMarket(tuple(float(p) for p in _require(doc, "probs", where)),
                              tuple(tuple(float(v) for v in row)
                                    for row in _require(doc, "values", where)))
    if family == "gaussian":
        return GaussianMarket(tuple(float(v) for v in _require(doc, "mean", where)),
                              tuple(float(v) for v in _require(doc, "sd", where)))
    if family == "uniform":
        return UniformMarket(tuple(float(v) for v in _require(doc, "lo", where)),
                             tuple(float(v) for v in _require(doc, "hi", where)))
    raise DataError(f"{where}: unknown market-mark family {family!r}")


def _loss_marks(doc: dict, where: str):
    family = _require(doc, "family", where)
    if family == "none":
        return no_loss
    if family == "point":
        return PointLoss(float(_require(doc, "size", where)))
    if family == "discrete":
        return DiscreteLoss(tuple(float(p) for p in _require(doc, "probs", where)),
                            tuple(float(q) for q in _require(doc, "sizes", where)))
    if family == "uniform":
        return UniformLoss(float(_require(doc, "lo", where)),
                           float(_require(doc, "hi", where)))
    raise DataError(f"{where}: unknown loss-mark family {family!r}")


def _piecewise(entry, d: int, where: str) -> PiecewiseConst:
    if isinstance(entry, dict):
        breaks = tuple(float(b) for b in _require(entry, "breaks", where))
        values = np.atleast_2d(np.asarray(_require(entry, "values", where),
                                          dtype=float))
        return PiecewiseConst(breaks, values)
    vec = np.asarray(entry, dtype=float)
    if vec.ndim == 0:
        vec = np.array([float(vec)] + [0.0] * d)
    if vec.shape != (d + 1,):
        raise DataError(f"{where}: volatility vector must have d+1 = {d + 1} "
                        f"components, got {vec.shape}")
    return PiecewiseConst.constant(vec)


def _contagion(doc, where: str):
    if doc is None:
        return NoContagion()
    kind = _require(doc, "kind", where)
    if kind == "none":
        return NoContagion()
    if kind == "constant":
        return ConstantContagion(float(_require(doc, "value", where)))
    if kind == "step":
        return StepContagion(tuple(float(e) for e in _require(doc, "edges", where)),
                             tuple(float(v) for v in _require(doc, "values", where)))
    raise DataError(f"{where}: unknown contagion kind {kind!r}")


def load_model(path: str | Path, quad_nodes: int | None = None) -> MarketModel:
    """Build a MarketModel from a YAML config; CSV paths resolve relative to
    the config file."""
    path = Path(path)
    doc = _load_yaml(path)
    base = path.parent

    tenor = TenorStructure(_require(doc, "tenor", str(path)))
    levels = LevelGrid(doc["levels"]) if "levels" in doc else None

    curves = _require(doc, "curves", str(path))
    riskfree = read_riskfree_csv(base / _require(curves, "riskfree", "curves"))
    defaultable = None
    if "defaultable" in curves:
        if levels is None:
            raise DataError(f"{path}: defaultable curve given without levels")
        defaultable = read_defaultable_csv(base / curves["defaultable"])
    snapshot = snapshot_from_curves(tenor, riskfree, levels, defaultable)

    drv = _require(doc, "driver", str(path))
    d = int(_require(drv, "dimension", "driver"))
    segments = []
    for si, seg in enumerate(_require(drv, "segments", "driver")):
        where = f"driver.segments[{si}]"
        c = np.atleast_2d(np.asarray(_require(seg, "c", where), dtype=float))
        if c.shape == (d, d):  # market block given; embed with zero loss row
            full = np.zeros((d + 1, d + 1))
            full[:d, :d] = c
            c = full
        comps = []
        for ci, comp in enumerate(seg.get("jumps", [])):
            cw = f"{where}.jumps[{ci}]"
            comps.append(JumpComponent(
                intensity=float(_require(comp, "intensity", cw)),
                market=_market_marks(comp.get("market", {"family": "none"}), d, cw),
                loss=_loss_marks(comp.get("loss", {"family": "none"}), cw),
                coupling=comp.get("coupling", "independent"),
                state_slope=float(comp.get("state_slope", 0.0)),
            ))
        segments.append(DriverSegment(start=float(_require(seg, "start", where)),
                                      end=float(_require(seg, "end", where)),
                                      c=c, components=tuple(comps)))
    driver = DriverSpec(d=d, segments=tuple(segments))

    vols_doc = _require(doc, "vols", str(path))
    sigma_entries = _require(vols_doc, "sigma", "vols")
    if len(sigma_entries) != tenor.n - 1:
        raise DataError(f"vols.sigma needs one entry per rate T_1..T_{tenor.n - 1}")
    sigma = tuple(_piecewise(e, d, f"vols.sigma[{i}]")
                  for i, e in enumerate(sigma_entries))
    gamma: tuple = ()
    if "gamma" in vols_doc and levels is not None:
        rows = []
        for i, entry in enumerate(vols_doc["gamma"]):
            where = f"vols.gamma[{i}]"
            if isinstance(entry, list) and entry and isinstance(entry[0], list) \
                    and len(entry) == len(levels):
                rows.append(tuple(_piecewise(e, d, where) for e in entry))
            else:
                shared = _piecewise(entry, d, where)
                rows.append(tuple(shared for _ in range(len(levels))))
        if len(rows) != tenor.n - 1:
            raise DataError("vols.gamma needs one row per rate")
        gamma = tuple(rows)
    vols = VolStructure(sigma=sigma, gamma=gamma,
                        contagion=_contagion(vols_doc.get("contagion"), "vols"),
                        C=float(vols_doc.get("C", 10.0)),
                        eps=float(vols_doc.get("eps", 0.5)))

    sd_doc = doc.get("spread_drift", {"kind": "zero"})
    drift = SpreadDrift(kind=sd_doc.get("kind", "zero"),
                        values=np.asarray(sd_doc["values"], dtype=float)
                        if "values" in sd_doc else 0.0)

    return MarketModel(tenor=tenor, snapshot=snapshot, driver=driver,
                       vols=vols, levels=levels, spread_drift=drift,
                       quad_nodes=quad_nodes or int(doc.get("quad_nodes", 32)))


def load_tranche(path: str | Path) -> STCDOSpec:
    doc = _load_yaml(Path(path))
    tr = _require(doc.get("pricing", doc), "tranche", str(path))
    return STCDOSpec(dates=tuple(float(t) for t in _require(tr, "dates", "tranche")),
                     attach=float(_require(tr, "attach", "tranche")),
                     detach=float(_require(tr, "detach", "tranche")),
                     spread=float(_require(tr, "spread", "tranche")))


def load_quotes(quotes_csv: str | Path, riskfree_csv: str | Path,
                t1_csv: str | Path) -> QuoteSurface:
    """Assemble a QuoteSurface from the three delimited inputs:
    quotes.csv (maturity, band_lo, band_hi, spread),
    riskfree.csv (T, P) and t1_legs.csv (band_lo, band_hi, value)."""
    import csv

    def rows(path, ncols):
        out = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    out.append(tuple(float(v) for v in row))
                except ValueError:
                    if lineno == 1:
                        continue  # header
                    raise DataError(f"{path}:{lineno}: cannot parse {row}")
                if len(row) != ncols:
                    raise DataError(f"{path}:{lineno}: expected {ncols} columns")
        return out

    rf_curve = read_riskfree_csv(riskfree_csv)
    t1_rows = rows(t1_csv, 3)
    quote_rows = rows(quotes_csv, 4)

    bands = tuple(sorted({(lo, hi) for lo, hi, _ in t1_rows}))
    t1 = np.zeros(len(bands))
    for lo, hi, v in t1_rows:
        t1[bands.index((lo, hi))] = v
    mats = sorted({m for m, *_ in quote_rows})
    t1_maturity = sorted(rf_curve)[0]
    maturities = tuple([t1_maturity] + mats)
    rf = np.array([rf_curve[t] if t in rf_curve else np.nan for t in maturities])
    if np.any(np.isnan(rf)):
        missing = [t for t, p in zip(maturities, rf) if np.isnan(p)]
        raise DataError(f"risk-free curve missing maturities {missing}")
    spreads = np.zeros((len(maturities) - 1, len(bands)))
    seen = set()
    for mat, lo, hi, s in quote_rows:
        j = maturities.index(mat) - 1
        if (lo, hi) not in bands:
            raise DataError(f"quote band ({lo}, {hi}) has no T_1 leg entry")
        spreads[j, bands.index((lo, hi))] = s
        seen.add((mat, lo, hi))
    want = {(m, lo, hi) for m in mats for lo, hi in bands}
    if want - seen:
        raise DataError(f"missing spread quotes for {sorted(want - seen)[:3]}...")
    return QuoteSurface(maturities=maturities, riskfree=rf, bands=bands,
                        t1_legs=t1, spreads=spreads)
