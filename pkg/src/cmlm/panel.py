"""Linear panel regressions with pooled, time, entity or two-way fixed effects.

Fixed effects are absorbed by the within transformation. Degrees of freedom
count the absorbed group intercepts as estimated parameters, so adjusted R^2,
F and the conventional standard errors match a dummy-variable regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy import stats

from cmlm.errors import (
    DataError,
    DuplicateColumn,
    DuplicateKey,
    NoSlopes,
    NoWithinVariation,
    RankDeficient,
    TooFewObservations,
    UnknownRegressor,
)
from cmlm.factor_model import ols

Effects = Literal["none", "time", "entity", "two_way"]
EFFECTS = ("none", "time", "entity", "two_way")
INTERCEPT = "(Intercept)"

DEMEAN_TOL = 1e-12
DEMEAN_MAX_ITER = 100


@dataclass(frozen=True)
class PanelObservation:
    entity_id: str
    time_id: str
    response: float
    covariates: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RegressionSpec:
    effects: Effects = "none"
    regressors: tuple[str, ...] = ()
    interactions: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.effects not in EFFECTS:
            raise ValueError(f"unknown effects {self.effects!r}")
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "interactions", tuple(tuple(p) for p in self.interactions))

    @property
    def columns(self) -> tuple[str, ...]:
        return self.regressors + tuple(interaction_name(a, b) for a, b in self.interactions)


@dataclass(frozen=True)
class RegressionResult:
    terms: tuple[str, ...]
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    p_values: dict[str, float]
    stars: dict[str, str]
    r_squared: float
    adj_r_squared: float
    f_stat: float
    f_df: tuple[int, int]
    f_p_value: float
    n_obs: int
    effects: str = "none"
    notes: tuple[str, ...] = ()


def interaction_name(a: str, b: str) -> str:
    return f"{a} x {b}"


def stars_for(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def expand_design(
    observations: Sequence[PanelObservation], spec: RegressionSpec
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Design matrix, response and column names.

    Pooled models get a leading intercept column; fixed-effect models do not
    (the group means take its place). Interaction columns come last.
    """
    names = spec.columns
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateColumn(f"duplicate design columns: {dupes}")
    needed = set(spec.regressors) | {x for pair in spec.interactions for x in pair}
    for i, obs in enumerate(observations):
        missing = needed - set(obs.covariates)
        if missing:
            raise UnknownRegressor(f"observation {i} lacks {sorted(missing)}")
    n = len(observations)
    cols = [np.array([o.covariates[r] for o in observations], dtype=float) for r in spec.regressors]
    for a, b in spec.interactions:
        cols.append(
            np.array([o.covariates[a] * o.covariates[b] for o in observations], dtype=float)
        )
    if spec.effects == "none":
        names = (INTERCEPT,) + names
        cols.insert(0, np.ones(n))
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    y = np.array([o.response for o in observations], dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("panel contains non-finite values")
    return X, y, names


def _codes(labels: Sequence[str]) -> tuple[np.ndarray, int]:
    uniq = {v: i for i, v in enumerate(sorted(set(labels)))}
    return np.array([uniq[v] for v in labels], dtype=np.intp), len(uniq)


def _group_demean(M: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    out = np.empty_like(M)
    for j in range(M.shape[1]):
        sums = np.bincount(codes, weights=M[:, j], minlength=n_groups)
        out[:, j] = M[:, j] - (sums / counts)[codes]
    return out


def _group_mean_max(M: np.ndarray, codes: np.ndarray, n_groups: int) -> float:
    if M.size == 0:
        return 0.0
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    return max(
        float(np.max(np.abs(np.bincount(codes, weights=M[:, j], minlength=n_groups) / counts)))
        for j in range(M.shape[1])
    )


def _n_components(ent: np.ndarray, n_ent: int, tim: np.ndarray, n_tim: int) -> int:
    """Connected components of the bipartite entity-time graph."""
    parent = list(range(n_ent + n_tim))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e, t in zip(ent, tim):
        ra, rb = find(int(e)), find(n_ent + int(t))
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n_ent + n_tim)})


def _two_way_exact(M, ent, n_ent, tim, n_tim):
    D = np.zeros((M.shape[0], n_ent + n_tim))
    D[np.arange(M.shape[0]), ent] = 1.0
    D[np.arange(M.shape[0]), n_ent + tim] = 1.0
    coef, *_ = np.linalg.lstsq(D, M, rcond=None)
    return M - D @ coef


def within_transform(
    M: np.ndarray,
    effects: str,
    entity_ids: Sequence[str],
    time_ids: Sequence[str],
) -> tuple[np.ndarray, int]:
    """Demean the columns of ``M``; return the result and the absorbed-parameter count.

    Two-way demeaning alternates entity and time sweeps until every group
    mean is below DEMEAN_TOL (relative to the column scale). Should that not
    happen within DEMEAN_MAX_ITER sweeps, the exact projection on the dummy
    basis is used instead.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if effects == "none":
        return M.copy(), 0
    ent, n_ent = _codes(entity_ids)
    tim, n_tim = _codes(time_ids)
    if effects == "entity":
        return _group_demean(M, ent, n_ent), n_ent
    if effects == "time":
        return _group_demean(M, tim, n_tim), n_tim
    absorbed = n_ent + n_tim - _n_components(ent, n_ent, tim, n_tim)
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    R = M.copy()
    for _ in range(DEMEAN_MAX_ITER):
        R = _group_demean(R, ent, n_ent)
        R = _group_demean(R, tim, n_tim)
        if _group_mean_max(R, ent, n_ent) <= DEMEAN_TOL * scale:
            return R, absorbed
    return _two_way_exact(M, ent, n_ent, tim, n_tim), absorbed


def f_statistic(r_squared: float, n_slopes: int, df_resid: int) -> tuple[float, tuple[int, int]]:
    """Joint F test that every slope is zero; +inf when the fit is exact."""
    if n_slopes < 1:
        raise NoSlopes("F test needs at least one slope")
    if df_resid < 1:
        raise TooFewObservations("no residual degrees of freedom")
    if r_squared >= 1.0:
        return math.inf, (n_slopes, df_resid)
    return (r_squared / n_slopes) / ((1.0 - r_squared) / df_resid), (n_slopes, df_resid)


def fit_panel(observations: Sequence[PanelObservation], spec: RegressionSpec) -> RegressionResult:
    keys: dict[tuple[str, str], int] = {}
    for i, o in enumerate(observations):
        k = (o.entity_id, o.time_id)
        if k in keys:
            raise DuplicateKey(k, (keys[k], i))
        keys[k] = i
    # canonical row order so results do not depend on input order
    observations = sorted(observations, key=lambda o: (o.entity_id, o.time_id))
    X, y, names = expand_design(observations, spec)
    n, k = X.shape
    if k == 0:
        raise NoSlopes("model has no regressors")
    ents = [o.entity_id for o in observations]
    times = [o.time_id for o in observations]
    Z, absorbed = within_transform(np.column_stack([y, X]), spec.effects, ents, times)
    y_w, X_w = Z[:, 0], Z[:, 1:]

    if spec.effects != "none":
        for j, name in enumerate(names):
            col_scale = max(1.0, float(np.max(np.abs(X[:, j]))))
            if float(np.max(np.abs(X_w[:, j]))) <= 1e-10 * col_scale:
                raise NoWithinVariation(f"{name!r} has no variation within {spec.effects} groups")

    df_resid = n - k - absorbed
    if df_resid < 1:
        raise TooFewObservations(f"{n} observations for {k + absorbed} parameters")
    try:
        coef, resid, xtx_inv = ols(X_w, y_w)
    except RankDeficient:
        raise RankDeficient(f"design is rank deficient after {spec.effects} effects") from None

    rss = float(resid @ resid)
    if spec.effects == "none":
        tss = float(np.sum((y - y.mean()) ** 2))
        n_slopes = k - 1 if INTERCEPT in names else k
    else:
        tss = float(y_w @ y_w)
        n_slopes = k
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    r2 = min(max(r2, 0.0), 1.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / df_resid

    s2 = rss / df_resid
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * s2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.where(coef == 0, 0.0, np.inf))
    pv = 2.0 * stats.t.sf(np.abs(t), df_resid)

    if n_slopes >= 1:
        f, f_df = f_statistic(r2, n_slopes, df_resid)
        f_p = 0.0 if math.isinf(f) else float(stats.f.sf(f, *f_df))
    else:
        f, f_df, f_p = math.nan, (0, df_resid), math.nan

    return RegressionResult(
        terms=names,
        coefficients={nm: float(c) for nm, c in zip(names, coef)},
        std_errors={nm: float(s) for nm, s in zip(names, se)},
        p_values={nm: float(p) for nm, p in zip(names, pv)},
        stars={nm: stars_for(float(p)) for nm, p in zip(names, pv)},
        r_squared=r2,
        adj_r_squared=adj,
        f_stat=f,
        f_df=f_df,
        f_p_value=f_p,
        n_obs=n,
        effects=spec.effects,
    )


# -- reporting ----------------------------------------------------------------


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return ""
    a = abs(v)
    if a != 0 and (a < 0.01 or a >= 1e4):
        return f"{v:.3e}"
    return f"{v:.3f}"


def format_table(result: RegressionResult, title: str = "", response: str = "") -> str:
    """Plain-text regression table: estimate with stars, std. error below."""
    label_w = max([len(t) for t in result.terms] + [22])
    lines = []
    if title:
        lines.append(title)
    if response:
        lines.append(f"Dependent variable: {response}")
    lines.append(f"Effects: {result.effects}")
    rule = "=" * (label_w + 24)
    lines.append(rule)
    for term in result.terms:
        est = _fmt(result.coefficients[term]) + result.stars[term]
        lines.append(f"{term:<{label_w}}  {est:>20}")
        lines.append(f"{'':<{label_w}}  {'(' + _fmt(result.std_errors[term]) + ')':>20}")
    lines.append("-" * (label_w + 24))
    f_txt = _fmt(result.f_stat) + stars_for(result.f_p_value) if not math.isnan(result.f_stat) else ""
    footer = [
        ("Observations", str(result.n_obs)),
        ("R2", _fmt(result.r_squared)),
        ("Adjusted R2", _fmt(result.adj_r_squared)),
        ("F Statistic", f"{f_txt} (df = {result.f_df[0]}; {result.f_df[1]})"),
    ]
    for name, val in footer:
        lines.append(f"{name:<{label_w}}  {val:>20}")
    lines.append(rule)
    lines.append("Note: *p<0.1; **p<0.05; ***p<0.01")
    lines.extend(result.notes)
    return "\n".join(lines) + "\n"


def result_rows(result: RegressionResult) -> list[tuple[str, float, float, float, str]]:
    """Rows for the ``term,estimate,std_error,p_value,stars`` CSV."""
    return [
        (
            t,
            result.coefficients[t],
            result.std_errors[t],
            result.p_values[t],
            result.stars[t],
        )
        for t in result.terms
    ]
