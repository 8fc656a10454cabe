import math
from dataclasses import replace

import numpy as np
import pytest

from haselhand import (
    Plant,
    equilibrium_contraction,
    resolve_scenario,
    run_scenario,
    voltage_profile,
)
from haselhand.config import ProfileSpec, ScenarioPreset, SimConfig, resolve_preset
from haselhand.errors import ConfigError
from haselhand.plant import ChainSim
from haselhand.trace import reconstruct_current


class TestVoltageProfile:
    def test_ramp_hold_midpoint(self):
        prof = voltage_profile("ramp_hold", 5.5, 1.0)
        assert prof(0.5) == pytest.approx(2.75)

    def test_holds_target_after_ramp(self):
        prof = voltage_profile("ramp_hold", 5.5, 1.0)
        assert prof(2.0) == 5.5

    def test_hold_zero(self):
        prof = voltage_profile("hold", 0.0)
        assert all(prof(t) == 0.0 for t in (0.0, 0.5, 10.0))

    def test_target_above_ceiling_rejected(self):
        with pytest.raises(ConfigError):
            voltage_profile("ramp_hold", 6.5, 1.0, ceiling=6.0)

    def test_nonpositive_ramp_rejected(self):
        with pytest.raises(ConfigError):
            voltage_profile("ramp", 5.5, 0.0)


class TestStep:
    def test_rest_is_a_fixed_point_at_zero_volts(self, cfg_nf):
        scenario = resolve_scenario(cfg_nf, "free_motion")
        plant = Plant(scenario, cfg_nf.sim)
        state = plant.initial_state()
        for _ in range(50):
            state = plant.step(state, 0.0, cfg_nf.sim.dt_internal)
        assert all(x == 0.0 for x in state.x.values())
        assert all(i == 0.0 for i in state.i.values())
        stack = state.stack_state("index_mcp")
        assert stack.c == cfg_nf.stacks["index_mcp"].c0
        assert stack.i == 0.0 and stack.x == 0.0

    def test_converged_hold_is_steady(self, cfg_nf):
        # After a long hold the stall point is reached: x and c freeze
        # and the noise-free current vanishes.
        preset = ScenarioPreset("hold_test", ("index",),
                                profiles={"*": ProfileSpec("ramp_hold", 5.5, 1.0)},
                                duration=3.0)
        sim = replace(cfg_nf.sim, duration=3.0)
        trace = run_scenario(resolve_preset(cfg_nf, preset), sim, seed=0)
        tail = slice(2700, 3001)
        for tid in trace.x:
            assert np.ptp(trace.x[tid][tail]) < 1e-6
        assert np.abs(trace.i_meas[tail]).max() < 1e-3

    def test_free_ramp_current_strictly_positive(self, free_trace_nf):
        ramp = (free_trace_nf.t > 0) & (free_trace_nf.t <= 1.0)
        assert (free_trace_nf.i_meas[ramp] > 0).all()

    def test_refined_integration_agrees(self, cfg_nf):
        # Oracle: the same model integrated ten times finer.
        preset = ScenarioPreset("ref_test", ("index",),
                                profiles={"*": ProfileSpec("ramp_hold", 5.5, 1.0)},
                                duration=2.0)
        scenario = resolve_preset(cfg_nf, preset)
        coarse = run_scenario(scenario, cfg_nf.sim, seed=0)
        fine_sim = SimConfig(dt_internal=1e-5, dt_sample=1e-3,
                             tau_mech=cfg_nf.sim.tau_mech, duration=2.0)
        fine = run_scenario(scenario, fine_sim, seed=0)
        for key in coarse.theta:
            a, b = coarse.theta[key][-1], fine.theta[key][-1]
            assert a == pytest.approx(b, rel=1e-3)
        ramp = (coarse.t > 0) & (coarse.t <= 1.0)
        assert (fine.i_meas[ramp] > 0).all()

    def test_contact_freezes_capacitance(self, cube_trace_nf, free_trace_nf):
        # Well after contact the capacitance stops changing while the
        # free-motion hand is still moving.
        c_grasp = cube_trace_nf.c["index_mcp"]
        c_free = free_trace_nf.c["index_mcp"]
        dc_grasp = abs(c_grasp[1400] - c_grasp[1300])
        dc_free_peak = abs(c_free[1000] - c_free[900])
        assert dc_grasp < 0.01 * dc_free_peak

    def test_current_drops_toward_charging_term_after_contact(
            self, cube_trace_nf, free_trace_nf):
        # Late in the ramp the motion term v dC/dt has collapsed: the
        # constrained current sits near C dv/dt while the free-motion
        # current still carries its full motion component.
        k = 980
        motion_grasp = cube_trace_nf.i_meas[k] - cube_trace_nf.c["index_mcp"][k] * 5.5
        motion_free = free_trace_nf.i_meas[k] - free_trace_nf.c["index_mcp"][k] * 5.5
        assert motion_free > 5.0
        assert motion_grasp < 0.15 * motion_free


class TestRunScenario:
    def test_deterministic_traces(self, cfg):
        scenario = resolve_scenario(cfg, "pinch_cube")
        a = run_scenario(scenario, cfg.sim, seed=11).to_csv_text()
        b = run_scenario(scenario, cfg.sim, seed=11).to_csv_text()
        assert a == b

    def test_different_seeds_differ(self, cfg):
        scenario = resolve_scenario(cfg, "free_motion")
        a = run_scenario(scenario, cfg.sim, seed=0)
        b = run_scenario(scenario, cfg.sim, seed=1)
        assert not np.array_equal(a.i_meas, b.i_meas)

    def test_mcp_saturates_near_thirty_degrees(self, free_trace_nf):
        final = math.degrees(free_trace_nf.theta["index_mcp"][-1])
        assert 25.0 <= final <= 35.0

    def test_zero_duration_single_row(self, cfg):
        preset = ScenarioPreset("zero", ("index",),
                                profiles={"*": ProfileSpec("hold", 0.0)},
                                duration=0.0)
        trace = run_scenario(resolve_preset(cfg, preset), cfg.sim, seed=0)
        assert len(trace) == 1
        assert trace.t[0] == 0.0

    def test_row_count_and_uniform_grid(self, free_trace_nf):
        sim_dt = free_trace_nf.dt_sample
        duration = free_trace_nf.meta["duration"]
        assert len(free_trace_nf) == round(duration / sim_dt) + 1
        assert np.allclose(np.diff(free_trace_nf.t), sim_dt)

    def test_unknown_preset_rejected_before_simulation(self, cfg):
        with pytest.raises(ConfigError, match="unknown preset"):
            resolve_scenario(cfg, "no_such_grasp")


class TestTraceInvariants:
    def test_deadband_no_motion_below_onset(self, cfg, free_trace_nf):
        # Below the lowest breakaway-equivalent voltage of the engaged
        # chains the stiction gate keeps every joint parked.
        from haselhand.cli import _onset_voltage
        engaged = list(free_trace_nf.x)
        onset = min(_onset_voltage(cfg, tid) for tid in engaged)
        assert onset > 3.0
        below = free_trace_nf.v_cmd < onset - 1e-9
        assert below.sum() > 100
        half_deg = math.radians(0.5)
        for theta in free_trace_nf.theta.values():
            assert (theta[below] < half_deg).all()

    def test_voltage_ceiling_respected(self, cfg):
        scenario = resolve_scenario(cfg, "free_motion")
        trace = run_scenario(scenario, cfg.sim, seed=5)
        limit = scenario.amplifier.v_ceiling + 6 * scenario.amplifier.monitor_noise_v
        assert (trace.v_meas <= limit).all()

    def test_noise_free_eq1_reconstruction(self, free_trace_nf, cube_trace_nf):
        for trace in (free_trace_nf, cube_trace_nf):
            rec = reconstruct_current(trace, "index_mcp")
            err = trace.i_meas[1:-1] - rec[1:-1]
            rms = float(np.sqrt(np.mean(err ** 2)))
            peak = float(np.abs(trace.i_meas).max())
            assert rms <= 0.01 * peak

    def test_contact_causality(self, cfg):
        # The current may only collapse below half the matched free
        # trace after the object has entered the force balance.
        for seed in range(3):
            grasp = run_scenario(resolve_scenario(cfg, "pinch_cube"), cfg.sim, seed=seed)
            free = run_scenario(
                resolve_scenario(cfg, "pinch_cube", drop_object=True), cfg.sim, seed=seed)
            t_flag = min(grasp.meta["events"]["first_contact"].values())
            dropped = np.nonzero(grasp.i_meas < 0.5 * free.i_meas)[0]
            if len(dropped):
                assert grasp.t[dropped[0]] >= t_flag

    def test_contact_force_only_with_flagging(self, cube_trace_nf):
        meta_contacts = cube_trace_nf.meta["events"]["first_contact"]
        for key, fc in cube_trace_nf.f_contact.items():
            if fc.max() > 0:
                assert key in meta_contacts
                first_force_t = cube_trace_nf.t[int(np.argmax(fc > 0))]
                assert meta_contacts[key] <= first_force_t


class TestStallSolverAgainstBisection:
    def test_matches_reference_solver(self, cfg):
        # The plant's exact piecewise walk and the generic bisection
        # must land on the same stall point for the same load.
        scenario = resolve_scenario(cfg, "pinch_cube")
        for spec in scenario.chains:
            chain = ChainSim(spec, scenario.obj)
            fb = spec.path.f_breakaway
            for v in (4.2, 4.8, 5.2, 5.5):
                a = (v / spec.stack.v_ref) ** 2
                x_fast = chain.stall_target(a, fb)
                load = lambda x: chain._load_at(x) + fb
                x_ref = equilibrium_contraction(spec.stack, v, load)
                x_ref = min(x_ref, chain.x_cap)
                assert x_fast == pytest.approx(x_ref, abs=1e-5)
