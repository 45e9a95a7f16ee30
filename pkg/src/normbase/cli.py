"""Command line entry points: ``normbase normalize | synth | evaluate``.

normalize  ingest channel CSVs, fit baselines, quantify study-range deviation,
           write report.json / daily.csv / monthly.csv / plots/.
synth      generate a synthetic building dataset with known ground truth.
evaluate   score models on the held-out test range and print the KPI table;
           loads saved model files when --models is given, trains otherwise.

Exit codes: 0 success, 2 configuration problem, 3 no model passed the
acceptance gate, 4 data problem.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np

from . import gbmodels, nnmodels
from .errors import ConfigError, DataError, NoValidBaselineError
from .features import (
    FeatureSpec,
    apply_scaler,
    build_features,
    make_sequences,
    scaler_from_dict,
    scaler_to_dict,
)
from .metrics import kpi_report, monthly_rollup
from .normalize import (
    MODEL_ORDER,
    SELECTION_GATE,
    SELECTION_TOP_K,
    LstmSetup,
    MlpSetup,
    PeriodSpec,
    run_pipeline,
)
from .svgchart import cumulative_chart, dlr_chart, overlay_chart
from .synthgen import SynthConfig, configure_for_target, generate, write_dataset
from .tsdata import (
    CHANNEL_UNITS,
    ENERGY_CHANNEL,
    GapFillPolicy,
    SeriesSchema,
    align,
    fill_gaps,
    parse_series,
    resample_daily,
)

log = logging.getLogger(__name__)

_SEED_OFFSET = {"mlp": 11, "lstm": 22, "gbt_exact": 33, "gbt_hist": 44}


# ---------------------------------------------------------------------------
# config plumbing


def _load_json(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def _reject_unknown(obj: dict, path: str, allowed):
    for key in obj:
        if key not in allowed:
            dotted = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown config key '{dotted}'")


def _mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"config key '{path}' must be an object")
    return obj


def _typed(value, kind: str, path: str):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key '{path}' must be an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key '{path}' must be a number")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"config key '{path}' must be a boolean")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"config key '{path}' must be a string")
        return value
    raise AssertionError(kind)


def _date_at(value, path: str) -> date:
    text = _typed(value, "str", path)
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"config key '{path}' is not an ISO date: {text!r}")


def _date_pair(value, path: str):
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"config key '{path}' must be a [start, end] pair")
    return (_date_at(value[0], f"{path}[0]"), _date_at(value[1], f"{path}[1]"))


def _typed_kwargs(obj: dict, path: str, types: dict) -> dict:
    _reject_unknown(obj, path, types)
    return {k: _typed(v, types[k], f"{path}.{k}") for k, v in obj.items()}


_NN_TRAIN_TYPES = {
    "learning_rate": "float",
    "epochs": "int",
    "batch_size": "int",
    "seed": "int",
    "early_stop_patience": "int",
    "validation_fraction": "float",
    "gradient_clip_norm": "float",
}

_BOOST_TYPES = {
    "rounds": "int",
    "learning_rate": "float",
    "max_depth": "int",
    "max_leaves": "int",
    "reg_lambda": "float",
    "gamma": "float",
    "min_child_hessian": "float",
    "bins": "int",
    "goss_a": "float",
    "goss_b": "float",
    "efb_max_conflict": "float",
    "early_stop_rounds": "int",
    "validation_fraction": "float",
    "seed": "int",
}


def _model_setups(section: dict, run_seed: int) -> dict:
    """Build per-model setups; absent models default to enabled."""
    _reject_unknown(section, "models", MODEL_ORDER)
    setups = {}
    for name in MODEL_ORDER:
        sub = dict(_mapping(section.get(name, {}), f"models.{name}"))
        enabled = _typed(sub.pop("enabled", True), "bool", f"models.{name}.enabled")
        if not enabled:
            continue
        base = f"models.{name}"
        if name == "mlp":
            hidden = sub.pop("hidden_sizes", [32])
            if not isinstance(hidden, list) or not hidden:
                raise ConfigError(f"config key '{base}.hidden_sizes' must be a non-empty list")
            hidden = tuple(_typed(h, "int", f"{base}.hidden_sizes") for h in hidden)
            activation = _typed(sub.pop("activation", "relu"), "str", f"{base}.activation")
            kwargs = _typed_kwargs(sub, base, _NN_TRAIN_TYPES)
            kwargs.setdefault("seed", run_seed + _SEED_OFFSET[name])
            setups[name] = MlpSetup(hidden, activation, nnmodels.TrainConfig(**kwargs))
        elif name == "lstm":
            hidden = _typed(sub.pop("hidden_size", 32), "int", f"{base}.hidden_size")
            kwargs = _typed_kwargs(sub, base, _NN_TRAIN_TYPES)
            kwargs.setdefault("seed", run_seed + _SEED_OFFSET[name])
            setups[name] = LstmSetup(hidden, nnmodels.TrainConfig(**kwargs))
        else:
            kwargs = _typed_kwargs(sub, base, _BOOST_TYPES)
            kwargs.setdefault("seed", run_seed + _SEED_OFFSET[name])
            setups[name] = gbmodels.BoostConfig(**kwargs)
    if not setups:
        raise ConfigError("all models are disabled")
    return setups


@dataclass
class RunSettings:
    """Validated normalize/evaluate configuration."""

    seed: int
    timezone: str
    interval_seconds: int
    inputs: dict
    periods: PeriodSpec
    feature_spec: FeatureSpec
    gap_policy: GapFillPolicy
    models: dict
    p: int
    selection: str
    top_k: int
    output_dir: Path
    save_models: bool
    reference_range: Optional[tuple]


_RUN_KEYS = (
    "seed",
    "timezone",
    "interval_seconds",
    "inputs",
    "periods",
    "features",
    "models",
    "kpi",
    "ensemble",
    "gap_fill",
    "output_dir",
    "save_models",
    "reference_range",
)


def load_run_settings(path: Path) -> RunSettings:
    doc = _load_json(path)
    _reject_unknown(doc, "", _RUN_KEYS)
    for required in ("inputs", "periods", "interval_seconds"):
        if required not in doc:
            raise ConfigError(f"missing required config key '{required}'")

    seed = _typed(doc.get("seed", 0), "int", "seed")
    timezone = _typed(doc.get("timezone", "UTC"), "str", "timezone")
    interval = _typed(doc["interval_seconds"], "int", "interval_seconds")

    inputs_raw = _mapping(doc["inputs"], "inputs")
    known = (ENERGY_CHANNEL,) + tuple(CHANNEL_UNITS)
    _reject_unknown(inputs_raw, "inputs", known)
    if ENERGY_CHANNEL not in inputs_raw:
        raise ConfigError(f"missing required config key 'inputs.{ENERGY_CHANNEL}'")
    base_dir = Path(path).resolve().parent
    inputs = {}
    for ch, p in inputs_raw.items():
        raw = Path(_typed(p, "str", f"inputs.{ch}"))
        inputs[ch] = raw if raw.is_absolute() else base_dir / raw

    periods_raw = _mapping(doc["periods"], "periods")
    _reject_unknown(periods_raw, "periods", ("train", "test", "study"))
    for k in ("train", "test", "study"):
        if k not in periods_raw:
            raise ConfigError(f"missing required config key 'periods.{k}'")
    periods = PeriodSpec(
        train=_date_pair(periods_raw["train"], "periods.train"),
        test=_date_pair(periods_raw["test"], "periods.test"),
        study=_date_pair(periods_raw["study"], "periods.study"),
    )

    feat_raw = _mapping(doc.get("features", {}), "features")
    _reject_unknown(feat_raw, "features", ("weather_channels", "calendar", "lookback_days"))
    feat_kwargs = {}
    if "weather_channels" in feat_raw:
        chans = feat_raw["weather_channels"]
        if not isinstance(chans, list):
            raise ConfigError("config key 'features.weather_channels' must be a list")
        feat_kwargs["weather_channels"] = tuple(
            _typed(c, "str", "features.weather_channels") for c in chans
        )
    if "calendar" in feat_raw:
        cal = feat_raw["calendar"]
        if not isinstance(cal, list):
            raise ConfigError("config key 'features.calendar' must be a list")
        feat_kwargs["calendar"] = tuple(_typed(c, "str", "features.calendar") for c in cal)
    if "lookback_days" in feat_raw:
        feat_kwargs["lookback_days"] = _typed(feat_raw["lookback_days"], "int", "features.lookback_days")
    feature_spec = FeatureSpec(**feat_kwargs)
    for ch in feature_spec.weather_channels:
        if ch not in inputs:
            raise ConfigError(f"features use channel {ch!r} but 'inputs.{ch}' is missing")

    gap_raw = _typed_kwargs(
        _mapping(doc.get("gap_fill", {}), "gap_fill"),
        "gap_fill",
        {"max_interior": "int", "max_edge": "int"},
    )
    gap_policy = GapFillPolicy(**gap_raw)

    kpi_raw = _typed_kwargs(_mapping(doc.get("kpi", {}), "kpi"), "kpi", {"p": "int"})
    p = kpi_raw.get("p", 1)
    if p < 0:
        raise ConfigError("config key 'kpi.p' must be non-negative")

    ens_raw = _typed_kwargs(
        _mapping(doc.get("ensemble", {}), "ensemble"),
        "ensemble",
        {"selection": "str", "top_k": "int"},
    )
    selection = ens_raw.get("selection", SELECTION_GATE)
    if selection not in (SELECTION_GATE, SELECTION_TOP_K):
        raise ConfigError(
            f"config key 'ensemble.selection' must be '{SELECTION_GATE}' or '{SELECTION_TOP_K}'"
        )
    top_k = ens_raw.get("top_k", 2)

    models = _model_setups(_mapping(doc.get("models", {}), "models"), seed)

    reference = None
    if doc.get("reference_range") is not None:
        reference = _date_pair(doc["reference_range"], "reference_range")

    out_raw = Path(_typed(doc.get("output_dir", "normbase_out"), "str", "output_dir"))
    output_dir = out_raw if out_raw.is_absolute() else base_dir / out_raw

    return RunSettings(
        seed=seed,
        timezone=timezone,
        interval_seconds=interval,
        inputs=inputs,
        periods=periods,
        feature_spec=feature_spec,
        gap_policy=gap_policy,
        models=models,
        p=p,
        selection=selection,
        top_k=top_k,
        output_dir=output_dir,
        save_models=_typed(doc.get("save_models", False), "bool", "save_models"),
        reference_range=reference,
    )


# ---------------------------------------------------------------------------
# ingestion shared by normalize and evaluate


def _ingest(settings: RunSettings):
    """Parse, gap-fill and daily-resample every channel the features need."""
    needed = (ENERGY_CHANNEL,) + tuple(settings.feature_spec.weather_channels)
    daily = {}
    for ch in needed:
        path = settings.inputs[ch]
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read input file for '{ch}': {e}")
        schema = SeriesSchema(ch, CHANNEL_UNITS[ch], settings.timezone, settings.interval_seconds)
        series = parse_series(text, schema)
        filled, gaps = fill_gaps(series, settings.gap_policy)
        n_filled = gaps.count("interpolated") + gaps.count("edge-hold")
        if n_filled or gaps.count("left-unfilled"):
            log.info(
                "%s: filled %d gap(s), left %d unfillable",
                ch, n_filled, gaps.count("left-unfilled"),
            )
        daily[ch] = resample_daily(filled, "sum" if ch == ENERGY_CHANNEL else "mean")
    energy = daily.pop(ENERGY_CHANNEL)
    return align(energy, daily)


# ---------------------------------------------------------------------------
# table rendering


def _fmt_cell(v: Optional[float]) -> str:
    return "-" if v is None else f"{v:9.4f}"


def _gate_cell(kpis) -> str:
    if kpis.gate is None:
        return "n/a (window too short for monthly KPIs)"
    if kpis.gate.passed:
        return "PASS"
    failed = [k for k, ok in kpis.gate.as_dict().items() if k != "passed" and not ok]
    return "FAIL(" + ",".join(name.removesuffix("_ok") for name in failed) + ")"


def kpi_table(models: dict) -> str:
    """Fixed-width text table: daily and monthly CV(RMSE), R^2, NMBE, gate."""
    head = (
        f"{'model':<10} {'d.CV(RMSE)':>10} {'d.R^2':>9} {'d.NMBE':>9} "
        f"{'m.CV(RMSE)':>10} {'m.R^2':>9} {'m.NMBE':>9}  gate"
    )
    rows = [head, "-" * len(head)]
    for name, kpis in models.items():
        d = kpis.daily
        m = kpis.monthly
        rows.append(
            f"{name:<10} {_fmt_cell(d.cv_rmse):>10} {_fmt_cell(d.r_squared):>9} {_fmt_cell(d.nmbe):>9} "
            f"{_fmt_cell(m.cv_rmse if m else None):>10} {_fmt_cell(m.r_squared if m else None):>9} "
            f"{_fmt_cell(m.nmbe if m else None):>9}  {_gate_cell(kpis)}"
        )
    return "\n".join(rows)


# ---------------------------------------------------------------------------
# artifacts


def _csv_num(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return repr(float(v))


def _write_daily_csv(path: Path, report):
    model_names = list(report.models)
    cum_act = dict(zip(report.cumulative_dates, report.cumulative_actual))
    cum_pred = dict(zip(report.cumulative_dates, report.cumulative_predicted))
    per_model = {}
    for name in model_names:
        m = report.models[name]
        per_model[name] = dict(zip(m.study_dates, m.study_pred))

    header = (
        ["date", "actual_kwh", "predicted_ensemble_kwh", "dlr_ensemble",
         "cumulative_actual_kwh", "cumulative_predicted_kwh"]
        + [f"predicted_{name}_kwh" for name in model_names]
    )
    rows = [",".join(header)]
    for i, d in enumerate(report.study_dates):
        cells = [
            d.isoformat(),
            _csv_num(report.study_actual[i]),
            _csv_num(report.ensemble_study[i]),
            _csv_num(report.dlr["ensemble"][i]),
            _csv_num(cum_act.get(d)),
            _csv_num(cum_pred.get(d)),
        ]
        cells += [_csv_num(per_model[name].get(d)) for name in model_names]
        rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n")


def _write_monthly_csv(path: Path, report):
    header = "month,actual_kwh,predicted_kwh,reduction_kwh"
    cover = ~np.isnan(np.asarray(report.ensemble_study, dtype=float))
    try:
        dates = [d for d, c in zip(report.study_dates, cover) if c]
        roll = monthly_rollup(
            dates,
            np.asarray(report.study_actual)[cover],
            np.asarray(report.ensemble_study)[cover],
        )
    except DataError:
        path.write_text(header + "\n")
        return
    rows = [header]
    for (yy, mm), a, p in zip(roll.months, roll.actual, roll.predicted):
        rows.append(f"{yy:04d}-{mm:02d},{_csv_num(a)},{_csv_num(p)},{_csv_num(p - a)}")
    path.write_text("\n".join(rows) + "\n")


def _write_plots(plots_dir: Path, report, table):
    plots_dir.mkdir(parents=True, exist_ok=True)

    # Held-out overlay: union of per-model test dates, actuals from the table.
    test_dates = sorted({d for m in report.models.values() for d in m.test_dates})
    pos = {d: i for i, d in enumerate(test_dates)}
    energy_at = {d: v for d, v, ex in zip(table.dates, table.energy, table.excluded) if not ex}
    actual = np.array([energy_at.get(d, np.nan) for d in test_dates])
    preds = {}
    for name, m in report.models.items():
        arr = np.full(len(test_dates), np.nan)
        for d, v in zip(m.test_dates, m.test_pred):
            arr[pos[d]] = v
        preds[name] = arr
    if test_dates:
        (plots_dir / "test_overlay.svg").write_text(overlay_chart(test_dates, actual, preds))
    if report.study_dates:
        (plots_dir / "dlr.svg").write_text(
            dlr_chart(report.study_dates, report.dlr["ensemble"])
        )
    if report.cumulative_dates:
        (plots_dir / "cumulative.svg").write_text(
            cumulative_chart(
                report.cumulative_dates, report.cumulative_actual, report.cumulative_predicted
            )
        )


def _save_models(models_dir: Path, report, settings: RunSettings):
    models_dir.mkdir(parents=True, exist_ok=True)
    for name, outcome in report.models.items():
        if name == "mlp":
            payload = nnmodels.mlp_to_dict(outcome.fitted)
        elif name == "lstm":
            payload = nnmodels.lstm_to_dict(outcome.fitted)
        else:
            payload = gbmodels.ensemble_to_dict(outcome.fitted)
        doc = {
            "kind": name,
            "feature_names": list(report.feature_names),
            "feature_scaler": scaler_to_dict(report.feature_scaler),
            "lookback_days": settings.feature_spec.lookback_days,
            "payload": payload,
        }
        (models_dir / f"{name}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )


def _write_artifacts(outdir: Path, report, table, settings: RunSettings):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"
    )
    _write_daily_csv(outdir / "daily.csv", report)
    _write_monthly_csv(outdir / "monthly.csv", report)
    _write_plots(outdir / "plots", report, table)
    if settings.save_models:
        _save_models(outdir / "models", report, settings)


# ---------------------------------------------------------------------------
# subcommands


def cmd_normalize(args) -> int:
    settings = load_run_settings(args.config)
    if args.out:
        settings.output_dir = Path(args.out)
    table = _ingest(settings)
    log.info("aligned table: %d days, %d excluded", len(table), table.n_excluded)

    failed = None
    try:
        report = run_pipeline(
            table,
            settings.periods,
            feature_spec=settings.feature_spec,
            models=settings.models,
            p=settings.p,
            selection=settings.selection,
            top_k=settings.top_k,
            seed=settings.seed,
            reference_range=settings.reference_range,
        )
    except NoValidBaselineError as e:
        report = e.report
        failed = str(e)

    _write_artifacts(settings.output_dir, report, table, settings)

    print(kpi_table({n: m.kpis for n, m in report.models.items()}))
    if failed is not None:
        print(f"\nno valid baseline: {failed}")
        print(f"artifacts written to {settings.output_dir}")
        return 3
    print(f"\nmodels used: {', '.join(report.models_used)}")
    print(f"reduction_kwh:      {report.reduction_kwh:.1f}")
    print(f"reduction_fraction: {report.reduction_fraction:.4f}")
    print(f"annual_share:       {report.annual_share:.4f}")
    print(f"artifacts written to {settings.output_dir}")
    return 0


_SYNTH_TYPES = {
    "seed": "int",
    "timezone": "str",
    "interval_seconds": "int",
    "base_load_kwh": "float",
    "occupant_share": "float",
    "occupancy_drop": "float",
    "target_reduction_fraction": "float",
    "temp_coeff": "float",
    "balance_temp_c": "float",
    "solar_coeff": "float",
    "noise_sigma_kwh": "float",
}


def cmd_synth(args) -> int:
    doc = _load_json(args.config)
    allowed = tuple(_SYNTH_TYPES) + ("start", "study_start", "study_end", "weekly_pattern", "output_dir")
    _reject_unknown(doc, "", allowed)

    kwargs = {}
    for key, kind in _SYNTH_TYPES.items():
        if key in doc and key != "target_reduction_fraction":
            kwargs[key] = _typed(doc[key], kind, key)
    for key in ("start", "study_start", "study_end"):
        if key in doc:
            kwargs[key] = _date_at(doc[key], key)
    if "weekly_pattern" in doc:
        wp = doc["weekly_pattern"]
        if not isinstance(wp, list):
            raise ConfigError("config key 'weekly_pattern' must be a list")
        kwargs["weekly_pattern"] = tuple(_typed(w, "float", "weekly_pattern") for w in wp)

    target = doc.get("target_reduction_fraction")
    if target is not None and "occupancy_drop" in doc:
        raise ConfigError("set either 'occupancy_drop' or 'target_reduction_fraction', not both")

    cfg = SynthConfig(**kwargs)
    if target is not None:
        cfg = configure_for_target(cfg, _typed(target, "float", "target_reduction_fraction"))

    base_dir = Path(args.config).resolve().parent
    out_raw = Path(args.out) if args.out else Path(_typed(doc.get("output_dir", "synth_data"), "str", "output_dir"))
    outdir = out_raw if out_raw.is_absolute() else base_dir / out_raw

    ds = generate(cfg)
    paths = write_dataset(ds, outdir)
    print(f"wrote {len(paths) - 1} channel files + ground_truth.json to {outdir}")
    print(f"planted reduction_kwh:      {ds.reduction_kwh:.1f}")
    print(f"planted reduction_fraction: {ds.reduction_fraction:.4f}")
    return 0


def _evaluate_saved(settings: RunSettings, table, models_dir: Path) -> dict:
    matrix = build_features(table, settings.feature_spec)
    test_mask = matrix.date_mask(*settings.periods.test)
    if int(test_mask.sum()) < 1:
        raise DataError("test range has no usable rows")
    date_pos = {d: i for i, d in enumerate(matrix.dates)}

    results = {}
    for name in MODEL_ORDER:
        f = models_dir / f"{name}.json"
        if not f.exists():
            continue
        try:
            doc = json.loads(f.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot load model file {f}: {e}")
        if doc.get("feature_names") != list(matrix.names):
            raise ConfigError(
                f"model {name} was trained on different feature columns than configured"
            )
        scaler = scaler_from_dict(doc["feature_scaler"])
        scaled = apply_scaler(matrix, scaler)
        if name == "lstm":
            seqs = make_sequences(scaled, int(doc["lookback_days"]))
            idx = [i for i, d in enumerate(seqs.target_dates)
                   if settings.periods.test[0] <= d <= settings.periods.test[1]]
            if not idx:
                raise DataError("test range yields no sequences for the recurrent model")
            params = nnmodels.lstm_from_dict(doc["payload"])
            pred = nnmodels.lstm_predict(params, seqs.windows[idx])
            dates = [seqs.target_dates[i] for i in idx]
            actual = matrix.y[[date_pos[d] for d in dates]]
        else:
            dates = [d for d, m in zip(matrix.dates, test_mask) if m]
            actual = matrix.y[test_mask]
            if name == "mlp":
                params = nnmodels.mlp_from_dict(doc["payload"])
                pred = nnmodels.mlp_predict(params, scaled.X[test_mask])
            else:
                ens = gbmodels.ensemble_from_dict(doc["payload"])
                pred = gbmodels.boost_predict(ens, scaled.X[test_mask])
        results[name] = kpi_report(dates, actual, pred, p=settings.p)
    if not results:
        raise ConfigError(f"no model files found in {models_dir}")
    return results


def cmd_evaluate(args) -> int:
    settings = load_run_settings(args.config)
    table = _ingest(settings)

    if args.models:
        kpis = _evaluate_saved(settings, table, Path(args.models))
    else:
        try:
            report = run_pipeline(
                table,
                settings.periods,
                feature_spec=settings.feature_spec,
                models=settings.models,
                p=settings.p,
                selection=settings.selection,
                top_k=settings.top_k,
                seed=settings.seed,
                reference_range=settings.reference_range,
            )
        except NoValidBaselineError as e:
            report = e.report
        kpis = {n: m.kpis for n, m in report.models.items()}

    print(kpi_table(kpis))
    passed = [n for n, k in kpis.items() if k.gate is not None and k.gate.passed]
    if not passed:
        print("\nno model passed the acceptance gate")
        return 3
    print(f"\ngate passed by: {', '.join(passed)}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normbase",
        description="Weather-normalized counterfactual baselines for daily building energy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_norm = sub.add_parser("normalize", help="fit baselines and quantify study-range deviation")
    p_norm.add_argument("--config", required=True, type=Path, help="run config JSON")
    p_norm.add_argument("--out", help="output directory (overrides config output_dir)")
    p_norm.set_defaults(func=cmd_normalize)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset with known ground truth")
    p_synth.add_argument("--config", required=True, type=Path, help="synth config JSON")
    p_synth.add_argument("--out", help="output directory (overrides config output_dir)")
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("evaluate", help="score models on the held-out test range")
    p_eval.add_argument("--config", required=True, type=Path, help="run config JSON")
    p_eval.add_argument("--models", help="directory of saved model JSON files")
    p_eval.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(
            stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
        )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NoValidBaselineError as e:
        print(f"no valid baseline: {e}", file=sys.stderr)
        return 3
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
