"""CSV schemas for positions, household profiles, factors, asset returns and VIX.

All readers are strict: the header must match exactly and a malformed row
raises with its line number instead of being skipped. Writers emit floats
with ``repr`` so that a write/read cycle reproduces values bit for bit.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence, TypeVar

from cmlm.errors import (
    BadRow,
    DataError,
    DuplicateKey,
    InsufficientHistory,
    MissingHeader,
    OutOfDomainValue,
    UsageError,
    ZeroTotalValue,
)
from cmlm.factor_model import FactorSeries

log = logging.getLogger(__name__)

T = TypeVar("T")

CASH_ASSET = "CASH"

POSITIONS_HEADER = ("household_id", "account_id", "month", "asset_id", "market_value")
PROFILES_HEADER = (
    "household_id",
    "net_worth_band",
    "income_band",
    "knowledge",
    "age_band",
    "n_children",
    "marital",
    "residence_years",
    "n_cars",
    "n_credit_cards",
    "account_type",
    "segment",
)
FACTORS_HEADER = ("date", "mkt_rf", "smb", "hml", "rmw", "cma", "rf")
RETURNS_HEADER = ("date", "asset_id", "ret")
VIX_HEADER = ("date", "vix_close")

KNOWLEDGE_LEVELS = ("extensive", "good", "limited", "none", "unknown")
MARITAL_LEVELS = ("married", "single", "inferred_married", "inferred_single", "unknown")
ACCOUNT_TYPES = ("cash", "ira", "keogh", "margin", "schwab_one")
SEGMENTS = ("active_trader", "affluent", "general")

# field -> (kind, domain); ints are inclusive ranges
PROFILE_DOMAINS: dict[str, tuple[str, object]] = {
    "net_worth_band": ("int", range(1, 7)),
    "income_band": ("int", range(1, 6)),
    "knowledge": ("str", KNOWLEDGE_LEVELS),
    "age_band": ("int", range(1, 8)),
    "n_children": ("int", range(0, 7)),
    "marital": ("str", MARITAL_LEVELS),
    "residence_years": ("int", range(0, 16)),
    "n_cars": ("int", range(0, 4)),
    "n_credit_cards": ("int", range(0, 7)),
    "account_type": ("str", ACCOUNT_TYPES),
    "segment": ("str", SEGMENTS),
}


@dataclass(frozen=True)
class PositionRecord:
    household_id: str
    account_id: str
    month: str
    asset_id: str
    market_value: float


@dataclass(frozen=True)
class HouseholdProfile:
    household_id: str
    net_worth_band: int
    income_band: int
    knowledge: str
    age_band: int
    n_children: int
    marital: str
    residence_years: int
    n_cars: int
    n_credit_cards: int
    account_type: str
    segment: str

    def __post_init__(self):
        for name, (_, domain) in PROFILE_DOMAINS.items():
            value = getattr(self, name)
            if value not in domain:
                raise OutOfDomainValue(name, value)


@dataclass(frozen=True)
class AccountMonthPortfolio:
    account_id: str
    month: str
    weights: Mapping[str, float]

    @property
    def n_stocks(self) -> int:
        return sum(1 for a in self.weights if a != CASH_ASSET)


# -- months -------------------------------------------------------------------


def parse_month(text: str) -> str:
    """Validate ``YYYY-MM`` and return it unchanged."""
    try:
        dt.datetime.strptime(text, "%Y-%m")
    except (TypeError, ValueError):
        raise DataError(f"bad month {text!r}, expected YYYY-MM") from None
    if len(text) != 7:
        raise DataError(f"bad month {text!r}, expected YYYY-MM")
    return text


def month_of(d: dt.date) -> str:
    return f"{d.year:04d}-{d.month:02d}"


def month_start(month: str) -> dt.date:
    y, m = map(int, parse_month(month).split("-"))
    return dt.date(y, m, 1)


def add_months(month: str, k: int) -> str:
    y, m = map(int, parse_month(month).split("-"))
    idx = y * 12 + (m - 1) + k
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


def month_end(month: str) -> dt.date:
    return month_start(add_months(month, 1)) - dt.timedelta(days=1)


def parse_date(text: str) -> dt.date:
    try:
        d = dt.date.fromisoformat(text)
    except (TypeError, ValueError):
        raise DataError(f"bad date {text!r}, expected YYYY-MM-DD") from None
    if len(text) != 10:
        raise DataError(f"bad date {text!r}, expected YYYY-MM-DD")
    return d


# -- generic csv plumbing -----------------------------------------------------


def _rows(path, header: Sequence[str]) -> Iterator[tuple[int, list[str]]]:
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != tuple(header):
            raise MissingHeader(f"{path}: expected header {','.join(header)}")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise BadRow(
                    f"{path}: expected {len(header)} fields, got {len(row)}", reader.line_num
                )
            yield reader.line_num, [c.strip() for c in row]


def _float(text: str, what: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise BadRow(f"{what}={text!r} is not a number", line) from None
    if not math.isfinite(v):
        raise BadRow(f"{what}={text!r} is not finite", line)
    return v


def _write(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


# -- positions ----------------------------------------------------------------


def load_positions(path) -> list[PositionRecord]:
    seen: dict[tuple[str, str, str], int] = {}
    out = []
    for line, (hh, acct, month, asset, value) in _rows(path, POSITIONS_HEADER):
        if not (hh and acct and asset):
            raise BadRow("empty identifier", line)
        try:
            parse_month(month)
        except DataError as exc:
            raise BadRow(str(exc), line) from None
        mv = _float(value, "market_value", line)
        if mv < 0:
            raise BadRow(f"negative market_value {value}", line)
        key = (acct, month, asset)
        if key in seen:
            raise DuplicateKey(key, (seen[key], line), source=str(path))
        seen[key] = line
        out.append(PositionRecord(hh, acct, month, asset, mv))
    return out


def write_positions(path, records: Iterable[PositionRecord]) -> None:
    _write(
        path,
        POSITIONS_HEADER,
        ((r.household_id, r.account_id, r.month, r.asset_id, float(r.market_value)) for r in records),
    )


def group_positions(records: Iterable[PositionRecord]) -> dict[tuple[str, str], list[PositionRecord]]:
    """Positions keyed by (account_id, month), sorted by key."""
    groups: dict[tuple[str, str], list[PositionRecord]] = {}
    for r in records:
        groups.setdefault((r.account_id, r.month), []).append(r)
    return dict(sorted(groups.items()))


def build_weights(positions: Sequence[PositionRecord]) -> AccountMonthPortfolio:
    """Value weights of one account-month; zero-value holdings are dropped."""
    if not positions:
        raise ZeroTotalValue("no positions")
    keys = {(p.account_id, p.month) for p in positions}
    if len(keys) != 1:
        raise DataError(f"positions span several account-months: {sorted(keys)}")
    total = math.fsum(p.market_value for p in positions)
    if not total > 0:
        acct, month = keys.pop()
        raise ZeroTotalValue(f"{acct} {month}: total market value is zero")
    weights = {p.asset_id: p.market_value / total for p in positions if p.market_value > 0}
    acct, month = keys.pop()
    return AccountMonthPortfolio(acct, month, weights)


# -- windows ------------------------------------------------------------------


def _default_date(item) -> dt.date:
    return item.date if hasattr(item, "date") else item[0]


def rolling_window(
    series: Sequence[T],
    as_of: str,
    length: int,
    key: Callable[[T], dt.date] = _default_date,
) -> list[T]:
    """The ``length`` most recent records dated before the month ``as_of``.

    Never returns a short window: too little history raises
    InsufficientHistory.
    """
    if length < 1:
        raise UsageError("window length must be >= 1")
    cutoff = month_start(as_of)
    prior = sorted((item for item in series if key(item) < cutoff), key=key)
    if len(prior) < length:
        raise InsufficientHistory(
            f"{length} periods requested before {as_of}, only {len(prior)} available"
        )
    return prior[-length:]


def factor_window(factors: FactorSeries, as_of: str, length: int) -> FactorSeries:
    idx = rolling_window(range(len(factors)), as_of, length, key=lambda i: factors.dates[i])
    return factors.subset(idx)


# -- profiles -----------------------------------------------------------------


def _parse_profile(row: list[str], line: int) -> HouseholdProfile:
    values: dict[str, object] = {"household_id": row[0]}
    for name, text in zip(PROFILES_HEADER[1:], row[1:]):
        kind, domain = PROFILE_DOMAINS[name]
        if kind == "int":
            try:
                v: object = int(text)
            except ValueError:
                raise BadRow(f"{name}={text!r} is not an integer", line) from None
        else:
            v = text
        if v not in domain:
            raise OutOfDomainValue(name, v, line)
        values[name] = v
    return HouseholdProfile(**values)


def load_household_profiles(path) -> list[HouseholdProfile]:
    """Strictly parse profiles; rows with blank fields are dropped and counted."""
    out = []
    seen: dict[str, int] = {}
    dropped = 0
    for line, row in _rows(path, PROFILES_HEADER):
        if not row[0]:
            raise BadRow("empty household_id", line)
        if any(c == "" for c in row[1:]):
            dropped += 1
            continue
        if row[0] in seen:
            raise DuplicateKey(row[0], (seen[row[0]], line), source=str(path))
        seen[row[0]] = line
        out.append(_parse_profile(row, line))
    if dropped:
        log.info("dropped %d households with missing information from %s", dropped, path)
    return out


def write_household_profiles(path, profiles: Iterable[HouseholdProfile]) -> None:
    _write(path, PROFILES_HEADER, ([getattr(p, f) for f in PROFILES_HEADER] for p in profiles))


# -- dated series -------------------------------------------------------------


def load_vix(path) -> list[tuple[dt.date, float]]:
    """VIX closes sorted ascending by date; repeated dates are rejected."""
    seen: dict[dt.date, int] = {}
    out = []
    for line, (date_s, close) in _rows(path, VIX_HEADER):
        try:
            d = parse_date(date_s)
        except DataError as exc:
            raise BadRow(str(exc), line) from None
        if d in seen:
            raise DuplicateKey(d.isoformat(), (seen[d], line), source=str(path))
        seen[d] = line
        out.append((d, _float(close, "vix_close", line)))
    out.sort(key=lambda t: t[0])
    return out


def write_vix(path, series: Iterable[tuple[dt.date, float]]) -> None:
    _write(path, VIX_HEADER, ((d.isoformat(), float(v)) for d, v in series))


def monthly_last(series: Iterable[tuple[dt.date, float]]) -> dict[str, float]:
    """Last observation within each calendar month."""
    out: dict[str, float] = {}
    for d, v in sorted(series, key=lambda t: t[0]):
        out[month_of(d)] = v
    return out


def load_factors(path) -> FactorSeries:
    rows = []
    seen: dict[dt.date, int] = {}
    for line, row in _rows(path, FACTORS_HEADER):
        try:
            d = parse_date(row[0])
        except DataError as exc:
            raise BadRow(str(exc), line) from None
        if d in seen:
            raise DuplicateKey(d.isoformat(), (seen[d], line), source=str(path))
        seen[d] = line
        vals = [_float(t, name, line) for t, name in zip(row[1:], FACTORS_HEADER[1:])]
        rows.append((d, vals))
    rows.sort(key=lambda t: t[0])
    return FactorSeries(
        [d for d, _ in rows],
        [v[:5] for _, v in rows] if rows else [],
        [v[5] for _, v in rows],
    )


def write_factors(path, factors: FactorSeries) -> None:
    _write(
        path,
        FACTORS_HEADER,
        (
            (d.isoformat(), *map(float, f), float(r))
            for d, f, r in zip(factors.dates, factors.factors, factors.rf)
        ),
    )


def load_asset_returns(path) -> dict[str, dict[dt.date, float]]:
    """Returns keyed by asset then date, in first-seen asset order."""
    out: dict[str, dict[dt.date, float]] = {}
    lines: dict[tuple[str, dt.date], int] = {}
    for line, (date_s, asset, ret) in _rows(path, RETURNS_HEADER):
        try:
            d = parse_date(date_s)
        except DataError as exc:
            raise BadRow(str(exc), line) from None
        if not asset:
            raise BadRow("empty asset_id", line)
        if (asset, d) in lines:
            raise DuplicateKey((asset, d.isoformat()), (lines[asset, d], line), source=str(path))
        lines[asset, d] = line
        out.setdefault(asset, {})[d] = _float(ret, "ret", line)
    return out


def write_asset_returns(path, returns: Mapping[str, Mapping[dt.date, float]]) -> None:
    _write(
        path,
        RETURNS_HEADER,
        (
            (d.isoformat(), asset, float(r))
            for asset, series in returns.items()
            for d, r in sorted(series.items())
        ),
    )


# -- inference output ---------------------------------------------------------

INFER_HEADER = (
    "account_id",
    "month",
    "mu_obs",
    "sigma_obs",
    "sharpe",
    "theta",
    "w_star",
    "efficiency",
    "status",
)
INFER_NUMERIC = INFER_HEADER[2:8]


@dataclass(frozen=True)
class InferenceRow:
    account_id: str
    month: str
    mu_obs: float | None = None
    sigma_obs: float | None = None
    sharpe: float | None = None
    theta: float | None = None
    w_star: float | None = None
    efficiency: float | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def write_inference_rows(path, rows: Iterable[InferenceRow]) -> None:
    def cell(v):
        return "" if v is None else repr(float(v))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INFER_HEADER)
        for r in rows:
            w.writerow(
                [r.account_id, r.month]
                + [cell(getattr(r, f)) for f in INFER_NUMERIC]
                + [r.status]
            )


def load_inference_rows(path) -> list[InferenceRow]:
    out = []
    seen: dict[tuple[str, str], int] = {}
    for line, row in _rows(path, INFER_HEADER):
        acct, month, *nums, status = row
        try:
            parse_month(month)
        except DataError as exc:
            raise BadRow(str(exc), line) from None
        if not status:
            raise BadRow("empty status", line)
        if (acct, month) in seen:
            raise DuplicateKey((acct, month), (seen[acct, month], line), source=str(path))
        seen[acct, month] = line
        vals = [None if t == "" else _float(t, name, line) for t, name in zip(nums, INFER_NUMERIC)]
        if status == "ok" and any(v is None for v in vals):
            raise BadRow("status ok with empty numeric field", line)
        out.append(InferenceRow(acct, month, *vals, status=status))
    return out
