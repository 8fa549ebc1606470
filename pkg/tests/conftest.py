"""Shared fixtures: a small but complete pipeline run and matrix builders."""
from __future__ import annotations

import dataclasses
import datetime as dt

import numpy as np
import pytest

from teamlift.config import RunConfig
from teamlift.features import FeatureMatrix, base_schema, fit_scaler
from teamlift.models import HyperParams, LinearModel, ModelBundle
from teamlift.panels import Period, RevenuePanel
from teamlift.pipeline import Paths, run_pipeline
from teamlift.synthgen import ContestDesign


def small_config(seed: int = 7) -> RunConfig:
    """A config small enough for test runs yet exercising every stage."""
    cfg = RunConfig(seed=seed)
    return dataclasses.replace(
        cfg,
        generate=dataclasses.replace(
            cfg.generate,
            n_cities=2,
            drivers_per_city=240,
            signups_per_contest=75,
            train_contests_per_city=2,
            val_contests_per_city=1,
            test_contests_per_city=1,
        ),
        train=dataclasses.replace(
            cfg.train,
            lasso_n_lambdas=4,
            gbrt_n_trees=(30,),
            gbrt_max_depth=(2,),
            gbrt_learning_rate=(0.1,),
            gbrt_subsample=(0.8,),
        ),
        simulate=dataclasses.replace(cfg.simulate, n_prototypes=1, n_boot=50),
        evaluate=dataclasses.replace(cfg.evaluate, permutation_rounds=200),
    )


@pytest.fixture(scope="session")
def run_paths(tmp_path_factory) -> Paths:
    """One full pipeline run shared by every test that needs real artifacts."""
    out = tmp_path_factory.mktemp("run")
    run_pipeline(small_config(), out)
    return Paths(out=out)


# One summary line per acceptance check, echoed after the test report so the
# verdicts are visible even when pytest captures stdout.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_panel(driver_id: str, start: dt.date, revenue, rides=None, hours=None) -> RevenuePanel:
    revenue = np.asarray(revenue, dtype=np.float64)
    n = revenue.shape[0]
    dates = np.datetime64(start, "D") + np.arange(n)
    if rides is None:
        rides = np.floor(revenue / 25.0)
    if hours is None:
        hours = revenue / 30.0
    return RevenuePanel(
        driver_id=driver_id,
        dates=dates,
        revenue=revenue,
        rides=np.asarray(rides, dtype=np.float64),
        hours=np.asarray(hours, dtype=np.float64),
    )


def make_design(**overrides) -> ContestDesign:
    base = dict(
        team_size=4,
        group_size=5,
        contest_days=3,
        start_date=dt.date(2018, 8, 10),
        signup_days=5,
        prize_schedule=(1000.0, 600.0, 400.0, 250.0, 0.0),
        captain_bonus=True,
        exclude_worst_member=False,
        performance_metric="revenue",
        captain_bonus_amount=200.0,
    )
    base.update(overrides)
    return ContestDesign(**base)


def linear_bundle(matrix: FeatureMatrix, coefs: dict, intercept: float = 0.0) -> ModelBundle:
    """Hand-built bundle predicting intercept + sum(coef * raw column).

    No scaling and exactly known coefficients, so simulation outputs have
    closed-form expectations.
    """
    schema = matrix.schema
    coef = np.zeros(len(schema))
    for name, c in coefs.items():
        coef[schema.index_of(name)] = c
    model = LinearModel(
        penalty="ridge",
        lam=0.0,
        intercept=intercept,
        coef=coef,
        n_iter=0,
        kkt_residual=0.0,
        converged=True,
    )
    sds = matrix.X.std(axis=0, ddof=1) if matrix.n_rows > 1 else np.zeros(len(schema))
    return ModelBundle(
        params=HyperParams(family="ridge", scaling="none"),
        scaler=fit_scaler(matrix, "none"),
        model=model,
        feature_names=schema.names(),
        fingerprint=schema.fingerprint(),
        column_sds=sds,
        train_rows=matrix.n_rows,
    )


def random_matrix(
    n_rows: int = 80,
    seed: int = 0,
    schema=None,
    contest_id: str = "cX-k00",
    design: ContestDesign | None = None,
) -> FeatureMatrix:
    """Random feature rows over the base schema, dummies kept 0/1.

    When a design is given, its columns are written into the matrix the same
    way real assembly would, so counterfactual rewrites have a ground truth.
    """
    schema = schema or base_schema()
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n_rows, len(schema)))
    for j, col in enumerate(schema.columns):
        if col.is_dummy:
            X[:, j] = rng.integers(0, 2, size=n_rows)
    if design is not None:
        def set_col(name, value):
            X[:, schema.index_of(name)] = value

        set_col("team_size", design.team_size)
        set_col("group_size", design.group_size)
        set_col("contest_days", design.contest_days)
        set_col("signup_days", design.signup_days)
        for r, p in enumerate(design.prize_schedule, start=1):
            set_col(f"prize_rank_{r}", p)
        set_col("captain_bonus", float(design.captain_bonus))
        set_col("rewards_5th_team", float(design.prize_schedule[4] > 0))
        set_col("exclude_worst_member", float(design.exclude_worst_member))
    y = rng.normal(0.0, 1.0, size=n_rows)
    keys = [(contest_id, f"d{i:04d}") for i in range(n_rows)]
    return FeatureMatrix(schema=schema, X=X, y=y, keys=keys)
