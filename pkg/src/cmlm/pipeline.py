"""Batch steps behind the command line: estimate, infer, regress, plot data."""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from cmlm.errors import (
    CmlmError,
    DataError,
    InsufficientData,
    InsufficientHistory,
    NumericError,
    RankDeficient,
    UnknownAsset,
    UnknownGrouping,
    UnknownModel,
    UsageError,
)
from cmlm.factor_model import (
    FactorSeries,
    MarketMoments,
    estimate_moments,
    fit_loadings,
    portfolio_moments,
    with_risk_free,
)
from cmlm.frontier import tangency_portfolio
from cmlm.inference import iqr_filter, profile_portfolio, quartiles
from cmlm.ingest import (
    CASH_ASSET,
    HouseholdProfile,
    InferenceRow,
    PositionRecord,
    add_months,
    build_weights,
    factor_window,
    group_positions,
    month_of,
    monthly_last,
)
from cmlm.panel import (
    PanelObservation,
    RegressionResult,
    RegressionSpec,
    fit_panel,
)

log = logging.getLogger(__name__)

SNAPSHOT_MAGIC = "cmlm1"


# -- moment snapshots ---------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    month: str
    window: int
    moments: MarketMoments
    excluded: tuple[str, ...] = ()


def candidate_months(factors: FactorSeries) -> list[str]:
    """Every month with factor data plus the month after the last one."""
    months = sorted({month_of(d) for d in factors.dates})
    if months:
        months.append(add_months(months[-1], 1))
    return months


def estimate_snapshots(
    factors: FactorSeries,
    returns: Mapping[str, Mapping[dt.date, float]],
    window: int,
) -> list[Snapshot]:
    """Moments for each month that has ``window`` factor periods before it.

    Assets without enough usable history in a window are excluded from that
    month's universe and listed in ``Snapshot.excluded``.
    """
    if window < 1:
        raise UsageError("window must be >= 1")
    out = []
    for month in candidate_months(factors):
        try:
            win = factor_window(factors, month, window)
        except InsufficientHistory:
            continue
        loadings, excluded, rank_failures = [], [], 0
        for asset in sorted(returns):
            try:
                loadings.append(fit_loadings(returns[asset], win, asset_id=asset))
            except InsufficientData:
                excluded.append(asset)
            except RankDeficient:
                excluded.append(asset)
                rank_failures += 1
        if not loadings:
            if rank_failures:
                raise RankDeficient(f"{month}: factor sample is collinear for every asset")
            log.warning("%s: no asset has enough history; skipped", month)
            continue
        out.append(Snapshot(month, window, estimate_moments(loadings, win), tuple(excluded)))
    return out


def write_snapshots(path, snapshots: Iterable[Snapshot]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(SNAPSHOT_MAGIC + "\n")
        for s in snapshots:
            rec = {
                "month": s.month,
                "window": s.window,
                "rf": s.moments.rf,
                "asset_ids": list(s.moments.asset_ids),
                "mu": s.moments.mu.tolist(),
                "sigma": s.moments.sigma.tolist(),
                "excluded": list(s.excluded),
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_snapshots(path) -> dict[str, Snapshot]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    if not lines or lines[0].strip() != SNAPSHOT_MAGIC:
        raise DataError(f"{path}: not a {SNAPSHOT_MAGIC} moments file")
    out = {}
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            mom = MarketMoments(tuple(rec["asset_ids"]), rec["mu"], rec["sigma"], rec["rf"])
            snap = Snapshot(rec["month"], int(rec["window"]), mom, tuple(rec.get("excluded", ())))
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path} line {lineno}: malformed snapshot ({exc})") from None
        if snap.month in out:
            raise DataError(f"{path} line {lineno}: duplicate month {snap.month}")
        out[snap.month] = snap
    return out


# -- inference ----------------------------------------------------------------


def worker_count() -> int:
    raw = os.environ.get("CMLM_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"CMLM_THREADS={raw!r} is not an integer") from None
    if n < 0:
        raise UsageError("CMLM_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _infer_month(
    month: str,
    groups: list[tuple[str, list[PositionRecord]]],
    snap: Snapshot | None,
    rf_override: float | None,
) -> list[InferenceRow]:
    def failed(acct, err: type[CmlmError] | str):
        status = err if isinstance(err, str) else err.status()
        return InferenceRow(acct, month, status=status)

    if snap is None:
        return [failed(acct, InsufficientHistory) for acct, _ in groups]
    rf = snap.moments.rf if rf_override is None else rf_override
    try:
        cml, _ = tangency_portfolio(snap.moments, rf)
    except NumericError as exc:
        return [failed(acct, type(exc)) for acct, _ in groups]
    # cash earns the same rate the line is anchored at
    base = MarketMoments(snap.moments.asset_ids, snap.moments.mu, snap.moments.sigma, rf)
    universe = with_risk_free(base, CASH_ASSET)
    pos = {a: i for i, a in enumerate(universe.asset_ids)}
    excluded = set(snap.excluded)

    rows = []
    for acct, records in groups:
        try:
            port = build_weights(records)
        except CmlmError as exc:
            rows.append(failed(acct, type(exc)))
            continue
        missing = [a for a in port.weights if a not in pos]
        if missing:
            err = InsufficientHistory if any(a in excluded for a in missing) else UnknownAsset
            rows.append(failed(acct, err))
            continue
        w = np.zeros(universe.n_assets)
        for a, v in port.weights.items():
            w[pos[a]] = v
        try:
            point = portfolio_moments(w, universe)
            prof = profile_portfolio(point, cml)
        except CmlmError as exc:
            rows.append(failed(acct, type(exc)))
            continue
        rows.append(
            InferenceRow(
                acct,
                month,
                mu_obs=point.mu_obs,
                sigma_obs=point.sigma_obs,
                sharpe=(point.mu_obs - rf) / point.sigma_obs,
                theta=prof.theta,
                w_star=prof.w_star,
                efficiency=prof.efficiency,
            )
        )
    return rows


def infer_profiles(
    snapshots: Mapping[str, Snapshot],
    positions: Sequence[PositionRecord],
    rf: float | None = None,
    workers: int | None = None,
) -> list[InferenceRow]:
    """One row per account-month, sorted by (account_id, month).

    ``rf`` overrides the snapshot's window-mean risk-free rate.
    """
    by_month: dict[str, list[tuple[str, list[PositionRecord]]]] = {}
    for (acct, month), recs in group_positions(positions).items():
        by_month.setdefault(month, []).append((acct, recs))
    months = sorted(by_month)
    workers = workers or worker_count()
    jobs = [(m, by_month[m], snapshots.get(m), rf) for m in months]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: _infer_month(*j), jobs))
    else:
        parts = [_infer_month(*j) for j in jobs]
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: (r.account_id, r.month))
    return rows


def summarize(rows: Sequence[InferenceRow], k: float = 1.5) -> str:
    ok = [r for r in rows if r.ok]
    statuses: dict[str, int] = {}
    for r in rows:
        statuses[r.status] = statuses.get(r.status, 0) + 1
    lines = [f"account-months: {len(rows)}"]
    lines += [f"  status {s}: {n}" for s, n in sorted(statuses.items())]
    if ok:
        for name in ("theta", "efficiency"):
            vals = [getattr(r, name) for r in ok]
            q1, q2, q3 = quartiles(vals)
            removed = int(len(vals) - iqr_filter(vals, k).sum())
            lines.append(
                f"{name}: q25={q1:.6g} q50={q2:.6g} q75={q3:.6g} "
                f"iqr_removed={removed} (k={k})"
            )
    return "\n".join(lines) + "\n"


# -- regression models --------------------------------------------------------

NET_WORTH_LABELS = {
    2: "Net Worth 25,000-49,999",
    3: "Net Worth 50,000-74,999",
    4: "Net Worth 75,000-99,999",
    5: "Net Worth 100,000-249,999",
    6: "Net Worth >250,000",
}
INCOME_LABELS = {
    2: "Income 25,000-49,999",
    3: "Income 50,000-74,999",
    4: "Income 75,000-99,999",
    5: "Income >100,000",
}
KNOWLEDGE_LABELS = {
    "good": "Good Knowledge",
    "limited": "Limited Knowledge",
    "none": "None Knowledge",
    "unknown": "Unknown Knowledge",
}
AGE_LABELS = {
    2: "Ages 25-34",
    3: "Ages 35-44",
    4: "Ages 45-54",
    5: "Ages 55-64",
    6: "Ages 65-74",
    7: "Ages >75",
}
MARITAL_LABELS = {
    "inferred_single": "Inferred Single",
    "married": "Married",
    "single": "Single",
    "unknown": "Unknown Marital",
}
ACCOUNT_LABELS = {
    "ira": "IRA Account",
    "keogh": "Keogh Account",
    "margin": "Margin Account",
    "schwab_one": "Schwab Account",
}
SEGMENT_LABELS = {"general": "General Brokerage", "active_trader": "Active Trader"}

REFERENCE_LEVELS = {
    "net_worth_band": "1 (1-24,999)",
    "income_band": "1 (1-24,999)",
    "knowledge": "extensive",
    "age_band": "1 (18-24)",
    "marital": "inferred_married",
    "account_type": "cash",
    "segment": "affluent",
}

CHILDREN = "Num. of Children"
RESIDENCE = "Length of Residence"
CARS = "Num. of Cars"
CARDS = "Num. of Credit Cards"
STOCKS = "Num. of Stocks"
SHARPE = "Portfolio Sharpe Ratio"
MEAN = "Portfolio Expected Return"
STD = "Portfolio Std. Deviation"
VIX = "VIX Index"

DEMOGRAPHICS = (
    tuple(NET_WORTH_LABELS.values())
    + tuple(INCOME_LABELS.values())
    + tuple(KNOWLEDGE_LABELS.values())
    + tuple(AGE_LABELS.values())
    + (CHILDREN,)
    + tuple(MARITAL_LABELS.values())
    + (RESIDENCE, CARS, CARDS)
)
ACCOUNT_INFO = tuple(ACCOUNT_LABELS.values()) + tuple(SEGMENT_LABELS.values())
PORTFOLIO = (STOCKS, SHARPE, MEAN, STD)
DUMMY_FAMILIES = {
    "net_worth_band": tuple(NET_WORTH_LABELS.values()),
    "income_band": tuple(INCOME_LABELS.values()),
    "knowledge": tuple(KNOWLEDGE_LABELS.values()),
    "age_band": tuple(AGE_LABELS.values()),
    "marital": tuple(MARITAL_LABELS.values()),
    "account_type": tuple(ACCOUNT_LABELS.values()),
    "segment": tuple(SEGMENT_LABELS.values()),
}
SEGMENT_X_STOCKS = (("General Brokerage", STOCKS), ("Active Trader", STOCKS))


@dataclass(frozen=True)
class ModelDef:
    response: str
    spec: RegressionSpec
    title: str

    @property
    def needs_household(self) -> bool:
        used = set(self.spec.regressors) | {x for p in self.spec.interactions for x in p}
        return bool(used - {VIX, SHARPE, MEAN, STD})


def _model(response, effects, regressors, interactions=(), title=""):
    return ModelDef(response, RegressionSpec(effects, tuple(regressors), tuple(interactions)), title)


MODELS: dict[str, ModelDef] = {
    "rv1": _model("theta", "time", DEMOGRAPHICS + ACCOUNT_INFO,
                  title="Risk aversion, time effects: demographics and account"),
    "rv2": _model("theta", "time", DEMOGRAPHICS + ACCOUNT_INFO + PORTFOLIO, SEGMENT_X_STOCKS,
                  title="Risk aversion, time effects: demographics, account and portfolio"),
    "rv3": _model("theta", "entity", (VIX,), title="Risk aversion, entity effects: VIX"),
    "rv4": _model("theta", "entity", PORTFOLIO + (VIX,), SEGMENT_X_STOCKS,
                  title="Risk aversion, entity effects: portfolio and VIX"),
    "eff1": _model("efficiency", "time", DEMOGRAPHICS,
                   title="Efficiency, time effects: demographics"),
    "eff2": _model("efficiency", "time", DEMOGRAPHICS + ACCOUNT_INFO,
                   title="Efficiency, time effects: demographics and account"),
    "eff3": _model("efficiency", "time", DEMOGRAPHICS + ACCOUNT_INFO + PORTFOLIO,
                   title="Efficiency, time effects: demographics, account and portfolio"),
    "eff4": _model("efficiency", "entity", (VIX,), title="Efficiency, entity effects: VIX"),
    "eff5": _model("efficiency", "entity", PORTFOLIO + (VIX,),
                   title="Efficiency, entity effects: portfolio and VIX"),
    "eff_twoway1": _model("efficiency", "two_way", PORTFOLIO[:1],
                          title="Efficiency, two-way effects: stocks"),
    "eff_twoway2": _model("efficiency", "two_way", PORTFOLIO[:2],
                          title="Efficiency, two-way effects: stocks, Sharpe"),
    "eff_twoway3": _model("efficiency", "two_way", PORTFOLIO[:3],
                          title="Efficiency, two-way effects: stocks, Sharpe, mean"),
    "eff_twoway4": _model("efficiency", "two_way", PORTFOLIO,
                          title="Efficiency, two-way effects: stocks, Sharpe, mean, std"),
}


def get_model(model_id: str) -> ModelDef:
    try:
        return MODELS[model_id]
    except KeyError:
        raise UnknownModel(
            f"unknown model {model_id!r}; choose from {', '.join(MODELS)}"
        ) from None


def encode_profile(p: HouseholdProfile) -> dict[str, float]:
    """Dummy-encode a profile against REFERENCE_LEVELS; counts pass through."""
    out = {}
    for level, label in NET_WORTH_LABELS.items():
        out[label] = float(p.net_worth_band == level)
    for level, label in INCOME_LABELS.items():
        out[label] = float(p.income_band == level)
    for level, label in KNOWLEDGE_LABELS.items():
        out[label] = float(p.knowledge == level)
    for level, label in AGE_LABELS.items():
        out[label] = float(p.age_band == level)
    for level, label in MARITAL_LABELS.items():
        out[label] = float(p.marital == level)
    for level, label in ACCOUNT_LABELS.items():
        out[label] = float(p.account_type == level)
    for level, label in SEGMENT_LABELS.items():
        out[label] = float(p.segment == level)
    out[CHILDREN] = float(p.n_children)
    out[RESIDENCE] = float(p.residence_years)
    out[CARS] = float(p.n_cars)
    out[CARDS] = float(p.n_credit_cards)
    return out


@dataclass
class RegressionRun:
    result: RegressionResult
    model_id: str
    model: ModelDef
    n_outliers: int = 0
    dropped_rows: int = 0
    dropped_columns: tuple[str, ...] = ()
    notes: list[str] = field(default_factory=list)


def account_index(positions: Iterable[PositionRecord]) -> dict[tuple[str, str], tuple[str, int]]:
    """(account, month) -> (household_id, number of risky holdings)."""
    out = {}
    for (acct, month), recs in group_positions(positions).items():
        n = sum(1 for r in recs if r.asset_id != CASH_ASSET and r.market_value > 0)
        out[acct, month] = (recs[0].household_id, n)
    return out


def build_panel(
    rows: Sequence[InferenceRow],
    model: ModelDef,
    profiles: Mapping[str, HouseholdProfile] | None = None,
    accounts: Mapping[tuple[str, str], tuple[str, int]] | None = None,
    vix: Mapping[str, float] | None = None,
) -> tuple[list[PanelObservation], int]:
    """Panel observations for ``model`` and the number of rows that could not be joined."""
    needed = set(model.spec.regressors) | {x for p in model.spec.interactions for x in p}
    obs, dropped = [], 0
    for r in rows:
        if not r.ok:
            continue
        cov = {SHARPE: r.sharpe, MEAN: r.mu_obs, STD: r.sigma_obs}
        if VIX in needed:
            if vix is None or r.month not in vix:
                dropped += 1
                continue
            cov[VIX] = vix[r.month]
        if model.needs_household:
            info = accounts.get((r.account_id, r.month)) if accounts else None
            prof = profiles.get(info[0]) if (info and profiles is not None) else None
            if info is None or (prof is None and needed - {STOCKS, SHARPE, MEAN, STD, VIX}):
                dropped += 1
                continue
            cov[STOCKS] = float(info[1])
            if prof is not None:
                cov.update(encode_profile(prof))
        obs.append(PanelObservation(r.account_id, r.month, getattr(r, model.response), cov))
    return obs, dropped


def run_regression(
    model_id: str,
    rows: Sequence[InferenceRow],
    profiles: Mapping[str, HouseholdProfile] | None = None,
    accounts: Mapping[tuple[str, str], tuple[str, int]] | None = None,
    vix: Mapping[str, float] | None = None,
    k: float = 1.5,
) -> RegressionRun:
    """Fit a registered model after 1.5 IQR outlier removal on the response.

    Dummy columns that are zero for every retained row (a level absent from
    the sample) are dropped and reported rather than failing the fit.
    """
    model = get_model(model_id)
    if model.needs_household and (accounts is None or profiles is None):
        raise UsageError(f"model {model_id} needs --positions and --demographics")
    if VIX in model.spec.regressors and vix is None:
        raise UsageError(f"model {model_id} needs --vix")
    obs, dropped = build_panel(rows, model, profiles, accounts, vix)
    if not obs:
        raise DataError("no usable observations for the regression")
    keep = iqr_filter([o.response for o in obs], k)
    n_out = int(len(obs) - keep.sum())
    obs = [o for o, kk in zip(obs, keep) if kk]

    spec = model.spec
    drop, notes = [], []
    for family, labels in DUMMY_FAMILIES.items():
        labels = [l for l in labels if l in spec.regressors]
        if not labels:
            continue
        present = [l for l in labels if any(o.covariates[l] != 0.0 for o in obs)]
        drop += [l for l in labels if l not in present]
        # with the reference level absent the remaining dummies span the constant
        if present and all(any(o.covariates[l] for l in present) for o in obs):
            drop.append(present[0])
            notes.append(f"Reference for {family} absent from sample; using {present[0]}")
    drop = tuple(drop)
    if drop:
        spec = RegressionSpec(
            spec.effects,
            tuple(r for r in spec.regressors if r not in drop),
            tuple(p for p in spec.interactions if not set(p) & set(drop)),
        )
    result = fit_panel(obs, spec)
    head = [f"Response: {model.response}; IQR outliers removed (k={k}): {n_out}"]
    if any(l in model.spec.regressors for ls in DUMMY_FAMILIES.values() for l in ls):
        head.append(
            "Reference levels: " + ", ".join(f"{k_}={v}" for k_, v in REFERENCE_LEVELS.items())
        )
    notes = head + notes
    if dropped:
        notes.append(f"Rows without joinable covariates: {dropped}")
    if drop:
        notes.append("Dropped: " + "; ".join(drop))
    result = dataclasses.replace(result, notes=tuple(result.notes) + tuple(notes))
    return RegressionRun(result, model_id, model, n_out, dropped, drop, notes)


# -- plot data ----------------------------------------------------------------

CATEGORICAL_BY = {
    "account_type": ("account_type", ("cash", "ira", "keogh", "margin", "schwab_one")),
    "net_worth": ("net_worth_band", (1, 2, 3, 4, 5, 6)),
    "knowledge": ("knowledge", ("extensive", "good", "limited", "none", "unknown")),
    "segment": ("segment", ("active_trader", "affluent", "general")),
    "age": ("age_band", (1, 2, 3, 4, 5, 6, 7)),
    "children": ("n_children", (0, 1, 2, 3, 4, 5, 6)),
}
SCATTER_BY = {"sharpe": "sharpe", "stddev": "sigma_obs"}
GROUPINGS = tuple(CATEGORICAL_BY) + tuple(SCATTER_BY)
HIST_BINS = 10


def scatter_data(rows: Sequence[InferenceRow], by: str, value: str = "theta") -> list[tuple[float, float]]:
    if by not in SCATTER_BY:
        raise UnknownGrouping(f"{by!r} is not a scatter grouping")
    return [(getattr(r, SCATTER_BY[by]), getattr(r, value)) for r in rows if r.ok]


def histogram_data(
    rows: Sequence[InferenceRow],
    by: str,
    profiles: Mapping[str, HouseholdProfile],
    accounts: Mapping[tuple[str, str], tuple[str, int]],
    value: str = "theta",
    bins: int = HIST_BINS,
) -> list[tuple[str, float, float, int]]:
    """Histogram of each account's time-averaged value, per category level.

    All levels are reported, including empty ones; bin edges are shared.
    """
    if by not in CATEGORICAL_BY:
        raise UnknownGrouping(f"unknown grouping {by!r}; choose from {', '.join(GROUPINGS)}")
    attr, levels = CATEGORICAL_BY[by]
    sums: dict[str, list[float]] = {}
    household: dict[str, str] = {}
    for r in rows:
        if not r.ok or (r.account_id, r.month) not in accounts:
            continue
        sums.setdefault(r.account_id, []).append(getattr(r, value))
        household[r.account_id] = accounts[r.account_id, r.month][0]
    means = {a: math.fsum(v) / len(v) for a, v in sums.items()}
    grouped: dict[object, list[float]] = {lvl: [] for lvl in levels}
    for acct in sorted(means):
        prof = profiles.get(household[acct])
        if prof is not None:
            grouped[getattr(prof, attr)].append(means[acct])
    pooled = [v for vals in grouped.values() for v in vals]
    edges = np.histogram_bin_edges(pooled if pooled else [0.0, 1.0], bins=bins)
    out = []
    for lvl in levels:
        counts, _ = np.histogram(grouped[lvl], bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            out.append((str(lvl), float(lo), float(hi), int(c)))
    return out


def _svg_header(w, h):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
    ]


def scatter_svg(points: Sequence[tuple[float, float]], xlabel: str, ylabel: str) -> str:
    w, h, pad = 480, 360, 40
    lines = _svg_header(w, h)
    if points:
        xs = np.array([p[0] for p in points])
        ys = np.array([p[1] for p in points])
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        sx = (w - 2 * pad) / (x1 - x0 or 1.0)
        sy = (h - 2 * pad) / (y1 - y0 or 1.0)
        for x, y in points:
            cx = pad + (x - x0) * sx
            cy = h - pad - (y - y0) * sy
            lines.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2" fill="steelblue"/>')
    lines.append(f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>')
    lines.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>')
    lines.append(f'<text x="{w // 2}" y="{h - 8}" text-anchor="middle" font-size="12">{xlabel}</text>')
    lines.append(
        f'<text x="12" y="{h // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {h // 2})">{ylabel}</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def histogram_svg(hist: Sequence[tuple[str, float, float, int]], title: str) -> str:
    groups: dict[str, list[int]] = {}
    for g, _, _, c in hist:
        groups.setdefault(g, []).append(c)
    panel_h, w, pad = 90, 480, 30
    h = pad + panel_h * max(len(groups), 1)
    lines = _svg_header(w, h)
    lines.append(f'<text x="{w // 2}" y="18" text-anchor="middle" font-size="13">{title}</text>')
    for i, (g, counts) in enumerate(groups.items()):
        top = pad + i * panel_h
        peak = max(counts) or 1
        bw = (w - 120) / len(counts)
        lines.append(f'<text x="5" y="{top + panel_h // 2}" font-size="11">{g}</text>')
        for j, c in enumerate(counts):
            bh = (panel_h - 20) * c / peak
            x = 100 + j * bw
            y = top + panel_h - 10 - bh
            lines.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bw - 2:.2f}" height="{bh:.2f}" fill="steelblue"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def vix_by_month(series) -> dict[str, float]:
    return monthly_last(series)
