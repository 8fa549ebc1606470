"""Feature schema, temporal firewall, scaling, and matrix assembly."""
import dataclasses
import datetime as dt

import numpy as np
import pytest

from conftest import make_design, make_panel, random_matrix
from teamlift import did
from teamlift.errors import LeakageError, SchemaError
from teamlift.features import (
    FeatureMatrix,
    Scaler,
    apply_scaler,
    assemble_matrix,
    base_schema,
    concat_matrices,
    driver_features,
    fit_scaler,
    read_matrix,
    read_schema,
    write_matrix,
    write_schema,
)
from teamlift.panels import Period
from teamlift.synthgen import CityConfig, EffectConfig, generate_city_pool, generate_contest
from test_synthgen import MID_MAY, small_dgp


class TestSchema:
    def test_base_schema_has_65_columns(self):
        schema = base_schema()
        assert len(schema) == 65

    def test_group_counts(self):
        schema = base_schema()
        by_group = {}
        for col in schema.columns:
            by_group[col.group] = by_group.get(col.group, 0) + 1
        assert by_group == {"contest": 17, "driver": 26, "team": 9, "relational": 3, "city": 10}

    def test_names_unique_and_fingerprint_stable(self):
        schema = base_schema()
        names = schema.names()
        assert len(set(names)) == len(names)
        assert schema.fingerprint() == base_schema().fingerprint()
        assert len(schema.fingerprint()) == 16

    def test_dummy_mask_marks_indicators(self):
        schema = base_schema()
        mask = schema.dummy_mask()
        assert mask[schema.index_of("gender_female")]
        assert mask[schema.index_of("captain_bonus")]
        assert not mask[schema.index_of("age")]
        assert not mask[schema.index_of("team_size")]

    def test_index_of_unknown_raises(self):
        with pytest.raises(SchemaError):
            base_schema().index_of("nope")


class TestFirewall:
    def test_firewall_rejects_windows_touching_signup(self):
        from teamlift.features import _firewall

        signup = dt.date(2018, 8, 5)
        ok = Period(dt.date(2018, 7, 1), dt.date(2018, 8, 4))
        assert _firewall(ok, signup) == ok
        with pytest.raises(LeakageError):
            _firewall(Period(dt.date(2018, 7, 1), dt.date(2018, 8, 5)), signup)
        with pytest.raises(LeakageError):
            _firewall(Period(dt.date(2018, 8, 6), dt.date(2018, 8, 9)), signup)

    def test_driver_feature_windows_end_before_signup(self):
        design = make_design(start_date=dt.date(2018, 8, 10), signup_days=5)
        panel = make_panel("d", dt.date(2018, 6, 1), list(np.full(80, 50.0)))
        feats = driver_features(_driver_stub("d"), panel, design, True)
        # constant panel at 50/day: every pre-signup mean is 50, sds are 0
        assert feats["rev_base_mean"] == 50.0
        assert feats["rev_7d_mean"] == 50.0
        assert feats["rev_30d_mean"] == 50.0
        assert feats["rev_30d_sd"] == 0.0
        assert feats["is_captain"] == 1.0

    def test_post_signup_data_cannot_move_features(self):
        """Perturbing every panel value on or after signup start leaves the
        assembled matrix bit-identical: nothing downstream of the firewall
        leaks into the features."""
        ds, records = _generated()
        matrix = assemble_matrix([ds], records)

        cut = np.datetime64(ds.signup_start(), "D")
        for i, p in list(ds.panels.items()):
            rev = p.revenue.copy()
            rev[p.dates >= cut] = 9999.0
            rides = p.rides.copy()
            rides[p.dates >= cut] = 777.0
            hours = p.hours.copy()
            hours[p.dates >= cut] = 55.0
            ds.panels[i] = make_panel(i, p.dates[0].astype(dt.date), rev, rides, hours)
        perturbed = assemble_matrix([ds], records)
        np.testing.assert_array_equal(matrix.X, perturbed.X)


def _driver_stub(driver_id: str):
    from teamlift.synthgen import DriverProfile

    return DriverProfile(
        id=driver_id,
        age=30,
        gender="male",
        platform_age_months=24,
        hometown="P1-h1",
        activity_region="Z1",
        rental_car=False,
        city_id="c01",
    )


def _generated(seed=19, n=80):
    pool = generate_city_pool(CityConfig(), n, seed=seed, city_id="c01")
    design = make_design(start_date=MID_MAY, team_size=4)
    ds, _ = generate_contest(
        pool.city, design, pool.drivers, small_dgp(), seed=seed, history=pool.history
    )
    return ds, did.estimate_ite(ds)


class TestAssembly:
    def test_one_row_per_treated_driver_sorted(self):
        ds, records = _generated()
        matrix = assemble_matrix([ds], records)
        assert matrix.n_rows == len(ds.treated_ids())
        assert matrix.keys == sorted(matrix.keys)
        assert matrix.X.shape == (matrix.n_rows, 65)
        labels = {r.driver_id: r.ite for r in records}
        for (cid, driver_id), y in zip(matrix.keys, matrix.y):
            assert y == labels[driver_id]

    def test_captaincy_and_dummies_encoded(self):
        ds, records = _generated()
        matrix = assemble_matrix([ds], records)
        captains = {t.captain_id for t in ds.teams}
        col = matrix.column("is_captain")
        for (cid, driver_id), v in zip(matrix.keys, col):
            assert v == float(driver_id in captains)
        prov = ds.city.province
        for p in ("P1", "P2", "P3", "P4", "P5", "P6"):
            np.testing.assert_array_equal(
                matrix.column(f"province_{p}"), float(p == prov) * np.ones(matrix.n_rows)
            )

    def test_unknown_contest_in_records_raises(self):
        ds, records = _generated()
        bad = dataclasses.replace(records[0], contest_id="ghost")
        with pytest.raises(SchemaError):
            assemble_matrix([ds], list(records) + [bad])

    def test_subset_and_concat_round_trip(self):
        a = random_matrix(30, seed=1, contest_id="cA")
        b = random_matrix(20, seed=2, contest_id="cB")
        both = concat_matrices(a, b)
        assert both.n_rows == 50
        assert both.keys == sorted(both.keys)
        back = both.subset_by_contests(["cA"])
        np.testing.assert_array_equal(np.sort(back.y), np.sort(a.y))
        with pytest.raises(SchemaError):
            concat_matrices(a, a)


class TestScaler:
    def test_standardize_centers_continuous_columns_only(self):
        m = random_matrix(200, seed=3)
        scaler = fit_scaler(m, "standardize")
        Z = apply_scaler(scaler, m)
        dummies = m.schema.dummy_mask()
        cont = ~dummies
        np.testing.assert_allclose(Z[:, cont].mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(Z[:, cont].std(axis=0, ddof=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(Z[:, dummies], m.X[:, dummies])

    def test_minmax_maps_to_unit_interval(self):
        m = random_matrix(100, seed=4)
        Z = apply_scaler(fit_scaler(m, "minmax"), m)
        cont = ~m.schema.dummy_mask()
        assert Z[:, cont].min() >= 0.0 and Z[:, cont].max() <= 1.0

    def test_constant_column_maps_to_zero(self):
        m = random_matrix(50, seed=5)
        j = m.schema.index_of("supply_demand_ratio")
        m.X[:, j] = 3.14
        for method in ("standardize", "minmax"):
            Z = apply_scaler(fit_scaler(m, method), m)
            np.testing.assert_array_equal(Z[:, j], 0.0)

    def test_none_is_identity(self):
        m = random_matrix(40, seed=6)
        Z = apply_scaler(fit_scaler(m, "none"), m)
        np.testing.assert_array_equal(Z, m.X)

    def test_transform_inverse_round_trip(self):
        m = random_matrix(80, seed=7)
        scaler = fit_scaler(m, "standardize")
        np.testing.assert_allclose(scaler.inverse(scaler.transform(m.X)), m.X, atol=1e-9)

    def test_scaler_schema_mismatch_raises(self):
        m = random_matrix(10, seed=8)
        scaler = Scaler(method="none", names=("a", "b"), center=np.zeros(2), scale=np.ones(2))
        with pytest.raises(SchemaError):
            apply_scaler(scaler, m)


class TestPersistence:
    def test_matrix_file_round_trip_bit_exact(self, tmp_path):
        m = random_matrix(25, seed=9)
        write_matrix(m, tmp_path / "m.tsv")
        back = read_matrix(tmp_path / "m.tsv")
        np.testing.assert_array_equal(back.X, m.X)
        np.testing.assert_array_equal(back.y, m.y)
        assert back.keys == m.keys
        assert back.schema.names() == m.schema.names()

    def test_schema_file_round_trip(self, tmp_path):
        schema = base_schema()
        write_schema(schema, tmp_path / "s.tsv")
        back = read_schema(tmp_path / "s.tsv")
        assert back.names() == schema.names()
        assert list(back.dummy_mask()) == list(schema.dummy_mask())
