import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cssrad.radial import RadialGrid, free_propagate, l2_norm
from cssrad.solver import (
    PRESETS,
    InstabilityError,
    SolverConfig,
    charge,
    energy,
    gaussian,
    indicator,
    ring,
    run,
    scaled_data,
    scaling_check,
    step,
)


def cfg(**kw):
    base = dict(g=-1.0, dt=1e-3, t_end=0.01, n=256, r_max=16.0)
    base.update(kw)
    return SolverConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw,msg", [
        (dict(dt=0.0), "dt must be positive"),
        (dict(dt=-1e-3), "dt must be positive"),
        (dict(t_end=-1.0), "t_end must be non-negative"),
        (dict(n=8), "n must be an integer >= 16"),
        (dict(n=20.5), "n must be an integer >= 16"),
        (dict(record_every=0), "record_every"),
        (dict(g=math.nan), "g must be finite"),
    ])
    def test_invalid(self, kw, msg):
        with pytest.raises(ValueError, match=msg):
            cfg(**kw)

    @pytest.mark.parametrize("g,focusing", [(-1.0, False), (0.999, False), (1.0, True), (5.0, True)])
    def test_regime_metadata(self, g, focusing):
        c = cfg(g=g)
        assert c.focusing is focusing
        assert c.regime.startswith("focusing" if focusing else "defocusing")

    def test_nsteps(self):
        assert cfg(dt=1e-3, t_end=1.0).nsteps == 1000


class TestConserved:
    def test_charge_values(self):
        g = RadialGrid(1024, 16.0)
        assert charge(g.field(np.zeros(1024, complex))) == 0
        # midpoint defect of int r e^{-r^2} dr is -h^2/24 f'(0) = -h^2/24
        assert charge(gaussian(g)) == pytest.approx(math.pi * (1 + g.h**2 / 12), rel=1e-9)

    def test_charge_is_scale_invariant(self):
        g = RadialGrid(1024, 16.0)
        phi = gaussian(g)
        assert charge(scaled_data(phi, 2.0)) == pytest.approx(charge(phi), rel=1e-12)

    def test_energy_of_zero(self):
        g = RadialGrid(64, 8.0)
        assert energy(g.field(np.zeros(64, complex)), -1.0) == 0

    def test_energy_small_data_is_kinetic(self):
        # ||grad e^{-r^2/2}||^2 = pi, so E ~ eps^2 pi / 2
        g = RadialGrid(2048, 16.0)
        eps = 1e-4
        assert energy(gaussian(g, amplitude=eps), 0.0) == pytest.approx(eps**2 * math.pi / 2, rel=1e-5)

    def test_energy_decomposition(self):
        g = RadialGrid(512, 16.0)
        phi = gaussian(g)
        e0, e1 = energy(phi, 0.0), energy(phi, 1.0)
        quartic = 2 * math.pi * np.sum(g.weights * np.abs(phi.values) ** 4) / 4
        assert e0 - e1 == pytest.approx(quartic, rel=1e-12)
        assert energy(phi, -1.0) - e0 == pytest.approx(quartic, rel=1e-12)


class TestStep:
    def test_zero_stays_zero(self):
        c = cfg()
        phi = c.grid.field(np.zeros(c.n, complex))
        assert np.all(run(c, phi).fields[-1].values == 0)

    def test_small_data_matches_free_flow(self):
        c = cfg(g=0.0, n=512)
        phi = gaussian(c.grid, amplitude=1e-8)
        a = step(phi, c).values
        b = free_propagate(phi, c.dt).values
        assert np.max(np.abs(a - b)) <= 1e-14 * np.max(np.abs(b))

    def test_step_advances_time(self):
        c = cfg()
        assert step(gaussian(c.grid), c).time == pytest.approx(c.dt)

    def test_global_phase_invariance(self):
        c = cfg(t_end=0.2, n=512)
        phi = gaussian(c.grid)
        a = run(c, phi).fields[-1].values
        b = run(c, phi.with_values(phi.values * np.exp(0.7j))).fields[-1].values
        np.testing.assert_allclose(np.abs(b), np.abs(a), rtol=0, atol=1e-12)

    def test_overflowing_data_aborts(self):
        c = cfg()
        with pytest.raises(InstabilityError) as info:
            run(c, gaussian(c.grid, amplitude=1e160))
        assert info.value.step == 1
        assert info.value.time == pytest.approx(c.dt)
        with pytest.raises(InstabilityError):
            step(gaussian(c.grid, amplitude=1e160), c)


class TestRun:
    def test_t_end_zero(self):
        c = cfg(t_end=0.0)
        traj = run(c, gaussian(c.grid))
        assert len(traj) == 1 and traj.times == [0.0]

    def test_snapshot_bookkeeping(self):
        c = cfg(t_end=0.01, record_every=1)
        traj = run(c, gaussian(c.grid))
        assert len(traj) == 11
        assert len(traj.charge_series) == len(traj.energy_series) == len(traj.fields) == 11
        assert np.all(np.diff(traj.times) > 0)

    def test_final_state_always_recorded(self):
        c = cfg(t_end=0.01, record_every=3)
        traj = run(c, gaussian(c.grid))
        assert len(traj) == 5
        assert traj.times[-1] == pytest.approx(0.01)

    def test_bit_identical_reruns(self):
        c = cfg(t_end=0.05)
        a = run(c, gaussian(c.grid)).values()
        b = run(c, gaussian(c.grid)).values()
        assert a.tobytes() == b.tobytes()

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            run(cfg(), gaussian(RadialGrid(128, 16.0)))

    def test_boundary_mass_warning(self, caplog):
        c = cfg(r_max=4.0, n=64, t_end=0.02, record_every=5)
        traj = run(c, gaussian(c.grid))
        assert len(traj.warnings) == 1 and "increase r_max" in traj.warnings[0]

    def test_no_warning_when_contained(self):
        c = cfg(t_end=0.02)
        assert run(c, gaussian(c.grid)).warnings == []

    def test_focusing_run_completes_with_conserved_charge(self):
        c = cfg(g=50.0, t_end=0.05, n=512)
        traj = run(c, gaussian(c.grid))
        assert abs(traj.charge_series[-1] / traj.charge_series[0] - 1) < 1e-10

    def test_charge_drift_and_second_order_energy(self):
        drifts = []
        for dt in (2e-3, 1e-3):
            c = cfg(dt=dt, t_end=0.5, n=512, record_every=50)
            traj = run(c, gaussian(c.grid))
            q = np.array(traj.charge_series)
            e = np.array(traj.energy_series)
            assert np.max(np.abs(q / q[0] - 1)) <= 1e-8
            drifts.append(np.max(np.abs(e / e[0] - 1)))
        assert drifts[0] / drifts[1] >= 3.0

    def test_self_convergence(self):
        finals = []
        for dt in (4e-3, 2e-3, 1e-3):
            c = cfg(dt=dt, t_end=0.2, n=512, record_every=1000)
            finals.append(run(c, gaussian(c.grid)).fields[-1])
        d1 = l2_norm(finals[0].with_values(finals[0].values - finals[1].values))
        d2 = l2_norm(finals[1].with_values(finals[1].values - finals[2].values))
        assert math.log2(d1 / d2) == pytest.approx(2.0, abs=0.2)


class TestScaling:
    def test_identity_scaling(self):
        c = cfg(t_end=0.02)
        rep = scaling_check(gaussian(c.grid), 1.0, c)
        assert rep.distance == 0.0 and rep.charge_difference == 0.0

    def test_lambda_two_converges(self):
        dists = []
        for n, dt in ((256, 5e-3), (512, 2.5e-3)):
            c = SolverConfig(g=-1.0, dt=dt, t_end=0.2, n=n, r_max=16.0)
            rep = scaling_check(gaussian(c.grid), 2.0, c)
            assert rep.charge_difference <= 1e-10 * rep.charge_original
            dists.append(rep.distance)
        assert dists[0] / dists[1] == pytest.approx(4.0, rel=0.15)

    def test_rejects_incommensurate_dt(self):
        c = cfg(dt=4e-3, t_end=0.25)
        with pytest.raises(ValueError, match="multiple of dt"):
            scaling_check(gaussian(c.grid), 2.0, c)

    @pytest.mark.parametrize("lam", [0.0, -2.0])
    def test_rejects_bad_lambda(self, lam):
        c = cfg()
        with pytest.raises(ValueError):
            scaling_check(gaussian(c.grid), lam, c)


def test_presets():
    g = RadialGrid(64, 4.0)
    assert set(PRESETS) == {"gaussian", "ring", "indicator"}
    assert indicator(g, 1.0).values[g.nodes > 1].sum() == 0
    assert np.argmax(np.abs(ring(g, center=2.0).values)) == np.argmin(np.abs(g.nodes - 2.0))


@settings(max_examples=15)
@given(st.floats(-3.0, 3.0), st.floats(0.3, 1.5), st.floats(0.1, 1.5))
def test_property_modulus_phase_steps_conserve_charge(g, width, amplitude):
    c = cfg(g=g, n=128, t_end=0.02)
    traj = run(c, gaussian(c.grid, width=width, amplitude=amplitude))
    q = np.array(traj.charge_series)
    assert np.max(np.abs(q - q[0])) <= 1e-11 * q[0]
