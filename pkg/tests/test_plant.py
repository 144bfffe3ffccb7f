import math

import numpy as np
import pytest

from battgate import plant, store
from battgate.errors import PreconditionError, SchemaError


def _linear_grid_map():
    # values sampled from an affine function; trilinear interpolation must
    # reproduce it exactly inside the grid
    soc = np.array([0.0, 0.3, 0.7, 1.0])
    temp = np.array([-10.0, 10.0, 30.0])
    cur = np.array([-5.0, 0.0, 5.0])
    s, t, c = np.meshgrid(soc, temp, cur, indexing="ij")
    return plant.GridMap(soc, temp, cur, 2.0 * s + 0.03 * t + 0.005 * c + 1.0)


class TestGridMap:
    def test_reproduces_affine_function(self):
        gm = _linear_grid_map()
        rng = np.random.default_rng(0)
        s = rng.uniform(0, 1, 200)
        t = rng.uniform(-10, 30, 200)
        c = rng.uniform(-5, 5, 200)
        vals, clamped = gm.evaluate(s, t, c)
        np.testing.assert_allclose(vals, 2.0 * s + 0.03 * t + 0.005 * c + 1.0, atol=1e-12)
        assert clamped is False

    def test_exact_at_nodes(self):
        gm = _linear_grid_map()
        for i, s in enumerate(gm.soc):
            for j, t in enumerate(gm.temp_c):
                for k, c in enumerate(gm.current_a):
                    vals, _ = gm.evaluate(s, t, c)
                    assert vals[0] == gm.values[i, j, k]

    def test_out_of_range_clamps_and_flags(self):
        gm = _linear_grid_map()
        far, clamped = gm.evaluate(2.0, 50.0, 99.0)
        edge, _ = gm.evaluate(1.0, 30.0, 5.0)
        assert clamped is True
        assert far[0] == edge[0]

    def test_singleton_axis_is_constant_without_flag(self):
        gm = plant.GridMap(np.array([0.5]), np.array([-10.0, 40.0]), np.array([0.0]),
                           np.array([[1.0], [2.0]]).reshape(1, 2, 1))
        lo, f1 = gm.evaluate(np.array([0.0]), np.array([-10.0]), np.array([-100.0]))
        hi, f2 = gm.evaluate(np.array([1.0]), np.array([-10.0]), np.array([100.0]))
        assert lo[0] == hi[0] == 1.0
        assert f1 is False and f2 is False

    def test_constant_map(self):
        gm = plant.GridMap.constant(42.0)
        vals, clamped = gm.evaluate(np.array([0.0, 1.0]), np.array([-40.0, 80.0]),
                                    np.array([-10.0, 10.0]))
        assert np.all(vals == 42.0) and clamped is False

    def test_validation(self):
        with pytest.raises(SchemaError):
            plant.GridMap(np.array([0.5, 0.5]), np.array([25.0]), np.array([0.0]),
                          np.zeros((2, 1, 1)))
        with pytest.raises(SchemaError):
            plant.GridMap(np.array([0.2, 0.5]), np.array([25.0]), np.array([0.0]),
                          np.zeros((3, 1, 1)))
        with pytest.raises(SchemaError):
            plant.GridMap(np.array([0.5]), np.array([25.0]), np.array([0.0]),
                          np.full((1, 1, 1), math.nan))


class TestArrhenius:
    def test_formula(self):
        r = plant.arrhenius_resistance(0.02, 298.15, 1600.0, 308.15)
        assert r == pytest.approx(0.02 * math.exp(1600.0 * (1 / 308.15 - 1 / 298.15)), rel=1e-15)
        assert plant.arrhenius_resistance(0.02, 298.15, 1600.0, 298.15) == 0.02

    def test_nonpositive_kelvin_rejected(self):
        with pytest.raises(PreconditionError):
            plant.arrhenius_resistance(0.02, 298.15, 1600.0, 0.0)
        with pytest.raises(PreconditionError):
            plant.arrhenius_resistance(0.02, 0.0, 1600.0, 300.0)

    def test_map_matches_scalar_formula(self):
        base = plant.GridMap.constant(0.02)
        amap = plant.ArrheniusMap(base, t_ref_k=298.15, ea_over_k=1600.0)
        temps_c = np.array([-10.0, 25.0, 45.0])
        vals, _ = amap.evaluate(np.full(3, 0.5), temps_c, np.zeros(3))
        for v, tc in zip(vals, temps_c):
            assert v == pytest.approx(
                plant.arrhenius_resistance(0.02, 298.15, 1600.0, tc + 273.15), rel=1e-15)
        with pytest.raises(PreconditionError):
            amap.evaluate(0.5, -273.15, 0.0)

    def test_cold_resistance_rises(self):
        amap = plant.ArrheniusMap(plant.GridMap.constant(0.02), 298.15, 1600.0)
        cold, _ = amap.evaluate(0.5, -10.0, 0.0)
        hot, _ = amap.evaluate(0.5, 45.0, 0.0)
        assert cold[0] > 0.02 > hot[0]


def _simple_params(r1=0.01, c1=100.0, r2=0.02, c2=2000.0, r0=0.02):
    return plant.EquivCircuitParams(
        r0_map=plant.GridMap.constant(r0),
        r1_map=plant.GridMap.constant(r1),
        c1_map=plant.GridMap.constant(c1),
        r2_map=plant.GridMap.constant(r2),
        c2_map=plant.GridMap.constant(c2),
        ocv_soc=np.array([0.0, 0.5, 1.0]),
        ocv_v=np.array([3.0, 3.7, 4.2]),
        capacity_ah=4.0,
    )


def _single_rc_params(r1=0.01, c1=100.0):
    return plant.EquivCircuitParams(
        r0_map=plant.GridMap.constant(0.02),
        r1_map=plant.GridMap.constant(r1),
        c1_map=plant.GridMap.constant(c1),
        r2_map=plant.GridMap.constant(0.0),  # zero R disables the pair
        c2_map=plant.GridMap.constant(1.0),
        ocv_soc=np.array([0.0, 0.5, 1.0]),
        ocv_v=np.array([3.0, 3.7, 4.2]),
        capacity_ah=4.0,
    )


class TestParamsValidation:
    def test_defaults_are_valid(self):
        p = plant.default_params()
        assert p.capacity_ah == 4.0

    def test_capacity_positive(self):
        with pytest.raises(PreconditionError):
            _simple_params().__class__(**{**_simple_params().__dict__, "capacity_ah": 0.0})

    def test_ocv_table_checks(self):
        base = _simple_params()
        with pytest.raises(SchemaError):
            plant.EquivCircuitParams(base.r0_map, base.r1_map, base.c1_map, base.r2_map,
                                     base.c2_map, np.array([0.0, 0.0, 1.0]),
                                     np.array([3.0, 3.5, 4.2]), 4.0)
        with pytest.raises(SchemaError):
            plant.EquivCircuitParams(base.r0_map, base.r1_map, base.c1_map, base.r2_map,
                                     base.c2_map, np.array([0.0, 0.5, 1.0]),
                                     np.array([3.0, 4.2, 3.5]), 4.0)
        with pytest.raises(SchemaError):
            plant.EquivCircuitParams(base.r0_map, base.r1_map, base.c1_map, base.r2_map,
                                     base.c2_map, np.array([0.0, 0.5, 1.5]),
                                     np.array([3.0, 3.5, 4.2]), 4.0)

    def test_positivity(self):
        base = _simple_params()
        with pytest.raises(SchemaError):
            plant.EquivCircuitParams(plant.GridMap.constant(0.0), base.r1_map, base.c1_map,
                                     base.r2_map, base.c2_map, base.ocv_soc, base.ocv_v, 4.0)
        with pytest.raises(SchemaError):
            plant.EquivCircuitParams(base.r0_map, base.r1_map, plant.GridMap.constant(-1.0),
                                     base.r2_map, base.c2_map, base.ocv_soc, base.ocv_v, 4.0)

    def test_time_constant_ordering(self):
        # tau1 = 10 s must stay below tau2; here tau2 = 8 s violates it
        with pytest.raises(SchemaError, match="time-constant"):
            _simple_params(r1=0.01, c1=1000.0, r2=0.004, c2=2000.0)

    def test_disabled_pair_skips_ordering(self):
        p = _single_rc_params()
        assert plant._pair_disabled(p.r2_map)


class TestOcvAndCoulomb:
    def test_ocv_exact_at_knots_linear_between(self):
        p = _simple_params()
        assert plant.ocv_lookup(p, 0.5) == 3.7
        assert plant.ocv_lookup(p, 0.25) == pytest.approx(3.35, abs=1e-15)
        out = plant.ocv_lookup(p, np.array([0.0, 1.0]))
        assert out[0] == 3.0 and out[1] == 4.2

    def test_ocv_rejects_out_of_range(self):
        p = _simple_params()
        with pytest.raises(PreconditionError):
            plant.ocv_lookup(p, 1.2)
        with pytest.raises(PreconditionError):
            plant.ocv_lookup(p, np.array([0.5, -0.1]))

    def test_ocv_clamps_to_knot_endpoints(self):
        p = plant.EquivCircuitParams(
            plant.GridMap.constant(0.02), plant.GridMap.constant(0.01),
            plant.GridMap.constant(100.0), plant.GridMap.constant(0.0),
            plant.GridMap.constant(1.0), np.array([0.2, 0.8]), np.array([3.2, 4.0]), 4.0)
        assert plant.ocv_lookup(p, 0.0) == 3.2
        assert plant.ocv_lookup(p, 1.0) == 4.0

    def test_coulomb_count_hand_values(self):
        # one hour at 1 A on a 4 Ah cell moves soc by exactly 0.25
        i = np.full(3600, 1.0)
        soc = plant.coulomb_count(i, 1.0, 4.0, 0.5)
        assert soc[-1] == pytest.approx(0.75, abs=1e-12)
        assert soc[0] == pytest.approx(0.5 + 1.0 / (3600.0 * 4.0), abs=1e-15)

    def test_coulomb_count_clamps(self):
        soc = plant.coulomb_count(np.full(10, -4.0 * 3600.0), 1.0, 4.0, 0.5)
        assert soc[0] == 0.0 and soc[-1] == 0.0
        soc = plant.coulomb_count(np.full(10, 4.0 * 3600.0), 1.0, 4.0, 0.5)
        assert np.all(soc[1:] == 1.0)

    def test_coulomb_count_preconditions(self):
        with pytest.raises(PreconditionError):
            plant.coulomb_count(np.ones(3), 0.0, 4.0, 0.5)
        with pytest.raises(PreconditionError):
            plant.coulomb_count(np.ones(3), 1.0, -1.0, 0.5)


class TestFirstOrderScan:
    def test_constant_path_matches_naive_recursion_bitwise(self):
        rng = np.random.default_rng(5)
        a = np.full(200, 0.97)
        b = rng.normal(0, 1, 200)
        got = plant._first_order_scan(a, b)
        acc, want = 0.0, [0.0]
        for k in range(1, 200):
            acc = a[k - 1] * acc + b[k - 1]
            want.append(acc)
        assert np.array_equal(got, np.array(want))

    def test_varying_coefficients(self):
        rng = np.random.default_rng(6)
        a = rng.uniform(0.9, 0.99, 50)
        b = rng.normal(0, 1, 50)
        got = plant._first_order_scan(a, b)
        acc = 0.0
        for k in range(1, 50):
            acc = a[k - 1] * acc + b[k - 1]
            assert got[k] == acc


class TestSimulateAm:
    def test_zero_current_gives_exact_ocv(self):
        p = _simple_params()
        res = plant.simulate_am(p, np.zeros(100), np.full(100, 25.0), 0.5, 0.05)
        assert np.all(res.voltage == 3.7)
        assert np.all(res.soc == 0.5)
        assert res.clamped is False

    def test_single_rc_step_closed_form(self):
        r1, c1, r0, i_dis, dt = 0.01, 100.0, 0.02, 2.0, 0.05
        p = _single_rc_params(r1, c1)
        n = 400
        res = plant.simulate_am(p, np.full(n, -i_dis), np.full(n, 25.0), 0.8, dt)
        k = np.arange(n)
        soc = np.clip(0.8 + np.cumsum(np.full(n, -i_dis)) * dt / (3600.0 * 4.0), 0.0, 1.0)
        expected = (np.interp(soc, p.ocv_soc, p.ocv_v) - i_dis * r0
                    - r1 * i_dis * (1.0 - np.exp(-k * dt / (r1 * c1))))
        np.testing.assert_allclose(res.voltage, expected, rtol=0, atol=1e-9)

    def test_two_rc_superposition_closed_form(self):
        r1, c1, r2, c2, r0, i_dis, dt = 0.01, 100.0, 0.02, 2000.0, 0.02, 1.5, 0.05
        p = _simple_params(r1, c1, r2, c2, r0)
        n = 600
        res = plant.simulate_am(p, np.full(n, -i_dis), np.full(n, 25.0), 0.9, dt)
        k = np.arange(n)
        soc = np.clip(0.9 - np.cumsum(np.full(n, i_dis)) * dt / (3600.0 * 4.0), 0.0, 1.0)
        expected = (np.interp(soc, p.ocv_soc, p.ocv_v) - i_dis * r0
                    - r1 * i_dis * (1.0 - np.exp(-k * dt / (r1 * c1)))
                    - r2 * i_dis * (1.0 - np.exp(-k * dt / (r2 * c2))))
        np.testing.assert_allclose(res.voltage, expected, rtol=0, atol=1e-9)

    def test_rc_relaxation_time_constant(self):
        import oracles
        r1, c1, dt = 0.01, 100.0, 0.05
        p = _single_rc_params(r1, c1)
        n_on, n_off = 2000, 400
        i = np.concatenate([np.full(n_on, -2.0), np.zeros(n_off)])
        res = plant.simulate_am(p, i, np.full(n_on + n_off, 25.0), 0.8, dt)
        ocv = np.interp(res.soc[n_on:], p.ocv_soc, p.ocv_v)
        vc = ocv - res.voltage[n_on:]  # pure RC relaxation once current stops
        tau = oracles.fit_exp_tau(vc, dt)
        assert tau == pytest.approx(r1 * c1, rel=1e-3)

    def test_clamp_flag_reported(self):
        p = plant.default_params()
        n = 10
        res = plant.simulate_am(p, np.zeros(n) - 1.0, np.full(n, 80.0), 0.5, 0.05)
        assert res.clamped is True
        res = plant.simulate_am(p, np.zeros(n) - 1.0, np.full(n, 25.0), 0.5, 0.05)
        assert res.clamped is False

    def test_preconditions(self):
        p = _simple_params()
        with pytest.raises(PreconditionError):
            plant.simulate_am(p, np.zeros(5), np.zeros(4), 0.5, 0.05)
        with pytest.raises(PreconditionError):
            plant.simulate_am(p, np.zeros(5), np.zeros(5), 1.5, 0.05)
        with pytest.raises(PreconditionError):
            plant.simulate_am(p, np.zeros(5), np.zeros(5), 0.5, 0.0)


class TestPlant:
    def test_extra_rc_subtraction_closed_form(self):
        p = _simple_params()
        cfg = plant.PlantConfig(base=p, extra_rc=plant.RcPair(0.005, 240000.0))
        n, dt, i_dis = 500, 0.05, 2.0
        i = np.full(n, -i_dis)
        t = np.full(n, 25.0)
        am = plant.simulate_am(p, i, t, 0.8, dt)
        out = plant.simulate_plant(cfg, i, t, 0.8, dt)
        k = np.arange(n)
        vc3 = 0.005 * i_dis * (1.0 - np.exp(-k * dt / 1200.0))
        np.testing.assert_allclose(am.voltage - out.channel("voltage"), vc3, atol=1e-12)

    def test_hysteresis_relaxation_and_hold(self):
        p = _simple_params()
        cfg = plant.PlantConfig(base=p, hysteresis_mag_v=0.015, hysteresis_tau_s=180.0)
        dt = 0.5
        i = np.concatenate([np.full(100, 1.0), np.zeros(50), np.full(100, -1.0)])
        t = np.full(len(i), 25.0)
        am = plant.simulate_am(p, i, t, 0.5, dt)
        out = plant.simulate_plant(cfg, i, t, 0.5, dt)
        h = out.channel("voltage") - am.voltage
        a = math.exp(-dt / 180.0)
        k = np.arange(len(i))
        np.testing.assert_allclose(h[:100], 0.015 * (1.0 - a ** k[:100]), atol=1e-12)
        # zero current freezes the state
        assert np.all(h[100:151] == h[100])
        # discharge pulls toward -mag
        assert h[-1] < h[150]

    def test_sensor_noise_deterministic_per_seed(self):
        cfg = plant.default_plant_config(seed=3)
        n = 200
        rngi = np.random.default_rng(0)
        i = rngi.normal(0, 1, n)
        t = np.full(n, 25.0)
        a = plant.simulate_plant(cfg, i, t, 0.5, 0.05)
        b = plant.simulate_plant(cfg, i, t, 0.5, 0.05)
        assert np.array_equal(a.channel("voltage"), b.channel("voltage"))
        c = plant.simulate_plant(plant.default_plant_config(seed=4), i, t, 0.5, 0.05)
        assert not np.array_equal(a.channel("voltage"), c.channel("voltage"))

    def test_channels_and_rate(self):
        cfg = plant.default_plant_config()
        out = plant.simulate_plant(cfg, np.ones(10) * 0.5, np.full(10, 25.0), 0.5, 0.05)
        assert set(out.channels) == {"current", "temperature", "soc", "voltage"}
        assert out.sample_rate_hz == pytest.approx(20.0)

    def test_config_validation(self):
        p = _simple_params()
        with pytest.raises(PreconditionError):
            plant.PlantConfig(base=p, hysteresis_mag_v=-1.0)
        with pytest.raises(PreconditionError):
            plant.PlantConfig(base=p, hysteresis_tau_s=0.0)
        with pytest.raises(PreconditionError):
            plant.RcPair(0.0, 100.0)


class TestSerialization:
    def test_params_round_trip(self, tmp_path):
        p = plant.default_params()
        path = tmp_path / "params.yaml"
        store.save_document(path, "ecm-params", plant.params_to_payload(p))
        _, _, payload = store.load_document(path, kind="ecm-params")
        q = plant.params_from_payload(payload)
        assert np.array_equal(q.ocv_v, p.ocv_v)
        assert isinstance(q.r0_map, plant.ArrheniusMap)
        assert q.r0_map.t_ref_k == p.r0_map.t_ref_k
        i = np.linspace(-2, 2, 20)
        t = np.full(20, 31.0)
        a = plant.simulate_am(p, i, t, 0.6, 0.05)
        b = plant.simulate_am(q, i, t, 0.6, 0.05)
        assert np.array_equal(a.voltage, b.voltage)

    def test_plant_config_round_trip_with_inf_snr(self, tmp_path):
        cfg = plant.PlantConfig(base=_simple_params(), extra_rc=None,
                                sensor_noise_snr_db=math.inf, seed=7)
        path = tmp_path / "plant.yaml"
        store.save_document(path, "plant-config", plant.plant_to_payload(cfg))
        _, _, payload = store.load_document(path)
        back = plant.plant_from_payload(payload)
        assert math.isinf(back.sensor_noise_snr_db)
        assert back.extra_rc is None and back.seed == 7
        cfg2 = plant.default_plant_config()
        back2 = plant.plant_from_payload(plant.plant_to_payload(cfg2))
        assert back2.extra_rc.tau_s == cfg2.extra_rc.tau_s
        assert back2.sensor_noise_snr_db == 50.0

    def test_unknown_map_kind(self):
        with pytest.raises(SchemaError):
            plant.map_from_payload({"kind": "spline"})
