"""Counterfactual-baseline pipeline: train, gate, ensemble, quantify.

Models train on the pre-disruption train range, prove themselves on the
held-out test range (KPIs + acceptance gate), then predict what consumption
would have been over the study range had nothing changed. Deviation comes
out as per-date load ratios (actual / predicted) and cumulative reduction.

Study-range predictions see only study-range weather/calendar features and
train-range targets; study targets are never shown to a model.

The per-model trainings are independent and may run on a small thread pool;
the NORMBASE_THREADS environment variable caps its size. Each model owns a
seeded RNG, so the thread count never changes any result.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from typing import Optional

import numpy as np

from . import gbmodels, nnmodels
from .errors import ConfigError, DataError, NoValidBaselineError, UndefinedMetricError
from .features import FeatureSpec, apply_scaler, build_features, fit_scaler, make_sequences
from .metrics import KpiReport, kpi_report

MODEL_ORDER = ("mlp", "lstm", "gbt_exact", "gbt_hist")

SELECTION_GATE = "gate-passing"
SELECTION_TOP_K = "top_k"

MIN_TRAIN_ROWS = 100
MIN_TEST_ROWS = 30


@dataclass(frozen=True)
class PeriodSpec:
    """Chronologically ordered, disjoint date ranges (inclusive bounds)."""

    train: tuple
    test: tuple
    study: tuple

    def __post_init__(self):
        for name in ("train", "test", "study"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name} range ends before it starts")
        if not (self.train[1] < self.test[0] and self.test[1] < self.study[0]):
            raise ConfigError("periods must be disjoint and ordered train < test < study")


@dataclass(frozen=True)
class MlpSetup:
    hidden_sizes: tuple = (32,)
    activation: str = "relu"
    train: nnmodels.TrainConfig = nnmodels.TrainConfig()


@dataclass(frozen=True)
class LstmSetup:
    hidden_size: int = 32
    train: nnmodels.TrainConfig = nnmodels.TrainConfig()


def default_model_configs(seed: int = 0) -> dict:
    """All four models with default hyperparameters and derived seeds."""
    return {
        "mlp": MlpSetup(train=nnmodels.TrainConfig(seed=seed + 11)),
        "lstm": LstmSetup(train=nnmodels.TrainConfig(seed=seed + 22)),
        "gbt_exact": gbmodels.BoostConfig(seed=seed + 33),
        "gbt_hist": gbmodels.BoostConfig(seed=seed + 44),
    }


# ---------------------------------------------------------------------------
# deviation operations


def daily_load_ratio(actual, predicted):
    """Actual / predicted per date.

    Returns:
        (ratio, undefined): ratio holds NaN where predicted <= 0; undefined
        is the matching bool mask.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise DataError("daily_load_ratio inputs must align")
    undefined = ~(p > 0)
    ratio = np.full(a.shape, np.nan)
    ratio[~undefined] = a[~undefined] / p[~undefined]
    return ratio, undefined


def cumulative_reduction(actual, predicted):
    """Total avoided consumption and its share of the counterfactual.

    Returns:
        (total_kwh, fraction) where total = sum(predicted - actual) and
        fraction = total / sum(predicted).

    Raises:
        UndefinedMetricError: when sum(predicted) <= 0.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.size == 0:
        raise DataError("cumulative_reduction needs aligned non-empty inputs")
    total_pred = float(np.sum(p))
    if total_pred <= 0:
        raise UndefinedMetricError("reduction fraction undefined: predicted total <= 0")
    total = float(np.sum(p - a))
    return total, total / total_pred


def ensemble_mean(predictions) -> np.ndarray:
    """Pointwise mean over aligned member prediction vectors."""
    rows = [np.asarray(p, dtype=float) for p in predictions]
    if not rows:
        raise DataError("ensemble_mean needs at least one member")
    return np.mean(np.stack(rows), axis=0)


def annual_share(total_reduction_kwh: float, reference_total_kwh: float) -> float:
    """Reduction expressed as a fraction of a reference period's consumption."""
    if reference_total_kwh <= 0:
        raise UndefinedMetricError("annual share undefined: reference total <= 0")
    return total_reduction_kwh / reference_total_kwh


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class ModelOutcome:
    """One trained model's predictions and quality record."""

    name: str
    kpis: KpiReport
    test_dates: list
    test_pred: np.ndarray
    study_dates: list
    study_pred: np.ndarray
    info: dict = field(default_factory=dict)
    fitted: object = None


@dataclass
class NormalizationReport:
    """Everything cmd_normalize persists; see as_dict for the JSON shape."""

    periods: PeriodSpec
    seed: int
    p: int
    selection: str
    feature_names: list
    feature_scaler: object
    models: dict
    models_used: list
    no_valid_baseline: bool
    study_dates: list
    study_actual: np.ndarray
    ensemble_study: np.ndarray
    ensemble_test_kpis: Optional[KpiReport]
    dlr: dict
    dlr_undefined_dates: list
    cumulative_dates: list
    cumulative_actual: np.ndarray
    cumulative_predicted: np.ndarray
    reduction_kwh: Optional[float]
    reduction_fraction: Optional[float]
    annual_share: Optional[float]
    reference_total_kwh: float

    def as_dict(self) -> dict:
        def clean(arr):
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(arr, dtype=float)]

        return {
            "schema_version": 1,
            "periods": {
                "train": [self.periods.train[0].isoformat(), self.periods.train[1].isoformat()],
                "test": [self.periods.test[0].isoformat(), self.periods.test[1].isoformat()],
                "study": [self.periods.study[0].isoformat(), self.periods.study[1].isoformat()],
            },
            "seed": self.seed,
            "kpi_p": self.p,
            "selection": self.selection,
            "feature_names": list(self.feature_names),
            "models": {
                name: {
                    "kpis": m.kpis.as_dict(),
                    "info": m.info,
                    "study_predicted": clean(m.study_pred),
                }
                for name, m in self.models.items()
            },
            "models_used": list(self.models_used),
            "flags": {
                "no_valid_baseline": self.no_valid_baseline,
                "dlr_undefined_dates": [d.isoformat() for d in self.dlr_undefined_dates],
            },
            "study": {
                "dates": [d.isoformat() for d in self.study_dates],
                "actual_kwh": clean(self.study_actual),
                "ensemble_predicted_kwh": clean(self.ensemble_study),
                "dlr": {name: clean(r) for name, r in self.dlr.items()},
            },
            "ensemble_test_kpis": self.ensemble_test_kpis.as_dict() if self.ensemble_test_kpis else None,
            "cumulative": {
                "dates": [d.isoformat() for d in self.cumulative_dates],
                "actual_kwh": clean(self.cumulative_actual),
                "predicted_kwh": clean(self.cumulative_predicted),
            },
            "totals": {
                "reduction_kwh": self.reduction_kwh,
                "reduction_fraction": self.reduction_fraction,
                "annual_share": self.annual_share,
                "reference_total_kwh": self.reference_total_kwh,
            },
        }


def _thread_budget(n_models: int) -> int:
    raw = os.environ.get("NORMBASE_THREADS")
    if raw is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"NORMBASE_THREADS must be an integer, got {raw!r}")
        if cap < 1:
            raise ConfigError("NORMBASE_THREADS must be positive")
    return max(1, min(cap, n_models))


def _fit_tabular(name, setup, X_tr, y_tr, X_te, X_st):
    if name == "mlp":
        params, trace = nnmodels.mlp_train(
            (X_tr, y_tr), setup.train,
            hidden_sizes=setup.hidden_sizes, activation=setup.activation,
        )
        info = {"epochs": trace.n_epochs, "best_epoch": trace.best_epoch}
        return params, info, nnmodels.mlp_predict(params, X_te), nnmodels.mlp_predict(params, X_st)
    kind = "exact" if name == "gbt_exact" else "histogram"
    ens, trace = gbmodels.boost_fit((X_tr, y_tr), setup, kind=kind)
    info = {"rounds": trace.n_rounds, "best_round": trace.best_round, "n_trees": len(ens.trees)}
    return ens, info, gbmodels.boost_predict(ens, X_te), gbmodels.boost_predict(ens, X_st)


def run_pipeline(
    table,
    periods: PeriodSpec,
    feature_spec: FeatureSpec = FeatureSpec(),
    models: Optional[dict] = None,
    p: int = 1,
    selection: str = SELECTION_GATE,
    top_k: int = 2,
    seed: int = 0,
    reference_range: Optional[tuple] = None,
) -> NormalizationReport:
    """Train all enabled models and quantify study-range deviation.

    Args:
        table: aligned daily table covering all three periods.
        periods: train/test/study ranges.
        feature_spec: feature layout, shared by all models.
        models: mapping of model name to its setup; None enables all four
            with defaults and seeds derived from ``seed``.
        p: NMBE adjustment.
        selection: 'gate-passing' (ensemble over gate passers) or 'top_k'
            (best k by daily CV(RMSE) regardless of gate).
        top_k: k for the top_k selection.
        seed: run seed, echoed in the report and used for default configs.
        reference_range: denominator period for the annual share; defaults
            to the test range.

    Returns:
        NormalizationReport.

    Raises:
        DataError: too few usable rows in a period.
        NoValidBaselineError: gate-passing selection and nothing passed; the
            assembled report rides on the exception.
    """
    if selection not in (SELECTION_GATE, SELECTION_TOP_K):
        raise ConfigError(f"unknown selection {selection!r}")
    if top_k < 1:
        raise ConfigError("top_k must be at least 1")
    if models is None:
        models = default_model_configs(seed)
    unknown = set(models) - set(MODEL_ORDER)
    if unknown:
        raise ConfigError(f"unknown model names: {sorted(unknown)}")
    enabled = [name for name in MODEL_ORDER if name in models]
    if not enabled:
        raise ConfigError("no models enabled")

    matrix = build_features(table, feature_spec)
    train_mask = matrix.date_mask(*periods.train)
    test_mask = matrix.date_mask(*periods.test)
    study_mask = matrix.date_mask(*periods.study)
    if int(train_mask.sum()) < MIN_TRAIN_ROWS:
        raise DataError(f"train range has {int(train_mask.sum())} usable rows, needs {MIN_TRAIN_ROWS}")
    if int(test_mask.sum()) < MIN_TEST_ROWS:
        raise DataError(f"test range has {int(test_mask.sum())} usable rows, needs {MIN_TEST_ROWS}")
    if int(study_mask.sum()) < 1:
        raise DataError("study range has no usable rows")

    scaler = fit_scaler(matrix, train_mask)
    scaled = apply_scaler(matrix, scaler)
    X, y = scaled.X, scaled.y
    test_dates = [d for d, m in zip(scaled.dates, test_mask) if m]
    study_dates = [d for d, m in zip(scaled.dates, study_mask) if m]
    study_actual = y[study_mask]

    seq_inputs = None
    if "lstm" in enabled:
        seqs = make_sequences(scaled, feature_spec.lookback_days)
        flags = {"train": periods.train, "test": periods.test, "study": periods.study}
        seq_idx = {
            key: [i for i, d in enumerate(seqs.target_dates) if lo <= d <= hi]
            for key, (lo, hi) in flags.items()
        }
        seq_inputs = (seqs, seq_idx)

    def fit_one(name):
        setup = models[name]
        if name == "lstm":
            seqs, seq_idx = seq_inputs
            tr = seq_idx["train"]
            if len(tr) < 30:
                raise DataError(f"lstm has {len(tr)} training sequences, needs 30")
            params, trace = nnmodels.lstm_train(
                (seqs.windows[tr], seqs.targets[tr]), setup.train, hidden_size=setup.hidden_size
            )
            te, st = seq_idx["test"], seq_idx["study"]
            return ModelOutcome(
                name=name,
                kpis=None,
                test_dates=[seqs.target_dates[i] for i in te],
                test_pred=nnmodels.lstm_predict(params, seqs.windows[te]),
                study_dates=[seqs.target_dates[i] for i in st],
                study_pred=nnmodels.lstm_predict(params, seqs.windows[st]),
                info={"epochs": trace.n_epochs, "best_epoch": trace.best_epoch},
                fitted=params,
            )
        fitted, info, test_pred, study_pred = _fit_tabular(
            name, setup, X[train_mask], y[train_mask], X[test_mask], X[study_mask]
        )
        return ModelOutcome(
            name=name,
            kpis=None,
            test_dates=list(test_dates),
            test_pred=test_pred,
            study_dates=list(study_dates),
            study_pred=study_pred,
            info=info,
            fitted=fitted,
        )

    with ThreadPoolExecutor(max_workers=_thread_budget(len(enabled))) as pool:
        outcomes = list(pool.map(fit_one, enabled))

    date_pos = {d: i for i, d in enumerate(scaled.dates)}
    results = {}
    for outcome in outcomes:  # pool.map preserves submission order
        if outcome.name == "lstm":
            actual = y[[date_pos[d] for d in outcome.test_dates]]
        else:
            actual = y[test_mask]
        outcome.kpis = kpi_report(outcome.test_dates, actual, outcome.test_pred, p=p)
        results[outcome.name] = outcome

    if selection == SELECTION_GATE:
        used = [n for n in enabled if results[n].kpis.gate is not None and results[n].kpis.gate.passed]
    else:
        ranked = sorted(enabled, key=lambda n: results[n].kpis.daily.cv_rmse)
        used = ranked[: min(top_k, len(ranked))]

    # Per-study-date ensemble over whichever selected members cover the date.
    study_index = {d: i for i, d in enumerate(study_dates)}
    ens_study = np.full(len(study_dates), np.nan)
    member_stack = np.full((len(used), len(study_dates)), np.nan)
    for k, name in enumerate(used):
        for d, v in zip(results[name].study_dates, results[name].study_pred):
            if d in study_index:
                member_stack[k, study_index[d]] = v
    if used:
        have = ~np.isnan(member_stack)
        cover = have.any(axis=0)
        ens_study[cover] = np.nansum(np.where(have, member_stack, 0.0), axis=0)[cover] / have.sum(axis=0)[cover]

    # Ensemble quality on the test range, where every member predicts.
    ensemble_test_kpis = None
    if used:
        common = [d for d in test_dates if all(d in results[n].test_dates for n in used)]
        if common:
            stack = []
            for n in used:
                pos = {d: i for i, d in enumerate(results[n].test_dates)}
                stack.append(np.array([results[n].test_pred[pos[d]] for d in common]))
            actual_common = np.array([y[date_pos[d]] for d in common])
            ensemble_test_kpis = kpi_report(common, actual_common, ensemble_mean(stack), p=p)

    dlr = {}
    undefined_dates = []
    for name in enabled:
        aligned = np.full(len(study_dates), np.nan)
        for d, v in zip(results[name].study_dates, results[name].study_pred):
            if d in study_index:
                aligned[study_index[d]] = v
        ratio, _ = daily_load_ratio(study_actual, np.where(np.isnan(aligned), -1.0, aligned))
        dlr[name] = ratio
    ratio, undef = daily_load_ratio(study_actual, np.where(np.isnan(ens_study), -1.0, ens_study))
    dlr["ensemble"] = ratio
    undefined_dates = [
        d for d, u, missing in zip(study_dates, undef, np.isnan(ens_study)) if u and not missing
    ]

    cover = ~np.isnan(ens_study)
    cum_dates = [d for d, c in zip(study_dates, cover) if c]
    cum_actual = np.cumsum(study_actual[cover])
    cum_pred = np.cumsum(ens_study[cover])

    reduction_kwh = reduction_fraction = share = None
    ref_lo, ref_hi = reference_range if reference_range else periods.test
    ref_rows = matrix.date_mask(ref_lo, ref_hi)
    reference_total = float(np.sum(matrix.y[ref_rows]))
    if used and cum_dates:
        # Total reduction is defined off the cumulative curves so the two are
        # consistent to the last bit.
        reduction_kwh = float(cum_pred[-1] - cum_actual[-1])
        total_pred = float(cum_pred[-1])
        if total_pred <= 0:
            raise UndefinedMetricError("reduction fraction undefined: predicted total <= 0")
        reduction_fraction = reduction_kwh / total_pred
        share = annual_share(reduction_kwh, reference_total)

    report = NormalizationReport(
        periods=periods,
        seed=seed,
        p=p,
        selection=selection,
        feature_names=list(scaled.names),
        feature_scaler=scaler,
        models=results,
        models_used=used,
        no_valid_baseline=not used,
        study_dates=study_dates,
        study_actual=study_actual,
        ensemble_study=ens_study,
        ensemble_test_kpis=ensemble_test_kpis,
        dlr=dlr,
        dlr_undefined_dates=undefined_dates,
        cumulative_dates=cum_dates,
        cumulative_actual=cum_actual,
        cumulative_predicted=cum_pred,
        reduction_kwh=reduction_kwh,
        reduction_fraction=reduction_fraction,
        annual_share=share,
        reference_total_kwh=reference_total,
    )

    if not used:
        raise NoValidBaselineError("no model passed the acceptance gate", report=report)
    return report
