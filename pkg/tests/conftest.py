from datetime import date

import pytest

from normbase import gbmodels, nnmodels, normalize, synthgen, tsdata


@pytest.fixture(scope="session")
def small_dataset():
    """Synthetic building with a 35% occupancy drop in autumn 2018.

    Training must span a full seasonal cycle or tree models cannot reach
    summer test temperatures and the quality gate (correctly) rejects them.
    """
    cfg = synthgen.SynthConfig(
        start=date(2017, 1, 1),
        study_start=date(2018, 9, 1),
        study_end=date(2018, 10, 15),
        occupancy_drop=0.35,
        seed=11,
    )
    return synthgen.generate(cfg)


@pytest.fixture(scope="session")
def small_table(small_dataset):
    daily = tsdata.resample_daily(small_dataset.energy, "sum")
    weather = {
        ch: tsdata.resample_daily(s, "mean") for ch, s in small_dataset.weather.items()
    }
    return tsdata.align(daily, weather)


@pytest.fixture(scope="session")
def small_periods():
    return normalize.PeriodSpec(
        train=(date(2017, 1, 1), date(2018, 6, 30)),
        test=(date(2018, 7, 1), date(2018, 8, 31)),
        study=(date(2018, 9, 1), date(2018, 10, 15)),
    )


@pytest.fixture()
def tree_models():
    """Fast tree-only model set for pipeline plumbing tests."""
    return {
        "gbt_exact": gbmodels.BoostConfig(rounds=60, learning_rate=0.2, seed=33),
        "gbt_hist": gbmodels.BoostConfig(rounds=60, learning_rate=0.2, seed=44),
    }


@pytest.fixture(scope="session")
def full_report(small_table, small_periods):
    """One pipeline run with all four models, shared across assertions."""
    models = {
        "mlp": normalize.MlpSetup(
            (16,), "relu", nnmodels.TrainConfig(epochs=200, seed=11)
        ),
        "lstm": normalize.LstmSetup(
            16, nnmodels.TrainConfig(epochs=120, batch_size=64, seed=22)
        ),
        "gbt_exact": gbmodels.BoostConfig(rounds=150, learning_rate=0.1, seed=33),
        "gbt_hist": gbmodels.BoostConfig(rounds=150, learning_rate=0.1, seed=44),
    }
    return normalize.run_pipeline(
        small_table, small_periods, models=models, seed=7
    )
