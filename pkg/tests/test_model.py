import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointcbm import milp
from jointcbm.dro import check_z2_probability, precompute
from jointcbm.milp import SolverOptions
from jointcbm.model import (DimensionError, ProblemInstance, Solution, build_and_solve,
                            build_inventory_milp, build_milp, cost_breakdown, draw_scenarios,
                            exhaustive_schedule_cost, solve, verify_solution)
from jointcbm.presets import regression_suite, tight_regression_case

from helpers import params_from, random_toy
from oracles import enumerate_plans


def single(**kw):
    base = dict(machine_of=[0], type_of=[0], n_machines=1, n_types=1, t_max=3, freeze=1,
                lead_time=1, c_hold=0.0, c_reg=0.0, c_exp=0.0, b_reg=0.0, h0=1)
    base.update(kw)
    return ProblemInstance(**base)


def test_three_epoch_toy():
    inst = single()
    sol = build_and_solve(inst, params_from([[5.0, 1.0, 9.0]]), "off")
    assert sol.status == milp.OPTIMAL
    assert sol.repair_epochs() == [2]
    assert sol.objective == pytest.approx(1.0 + inst.c_down[0] + inst.c_crew)
    assert exhaustive_schedule_cost(inst, params_from([[5.0, 1.0, 9.0]]), [2]) == pytest.approx(sol.objective)


def test_gamma_at_least_j_matches_off():
    rng = np.random.default_rng(3)
    inst, pp = random_toy(rng, n_components=3, t_max=5, gamma=3)
    a = build_and_solve(inst, pp, "exact")
    b = build_and_solve(inst, pp, "off")
    assert a.objective == pytest.approx(b.objective)
    assert a.a_final == 1.0


def test_no_supplier_forces_expedited_orders():
    inst = ProblemInstance(machine_of=[0, 1], type_of=[0, 0], n_machines=2, n_types=1, t_max=4,
                           freeze=1, lead_time=1, supplier_capacity=0.0, h0=0, c_hold=0.1,
                           c_reg=1.0, c_exp=5.0, b_reg=1.0)
    pp = params_from([[3, 2, 1, 4], [1, 2, 3, 4]])
    sol = build_and_solve(inst, pp, "off")
    assert sol.g_exp.sum() == 2 and sol.g_reg.sum() == 0
    assert cost_breakdown(inst, pp, sol)["ordering"] == pytest.approx(2 * 5.0)
    assert verify_solution(inst, pp, sol).ok


def test_zero_crew_is_infeasible():
    sol = build_and_solve(single(crew_capacity=0), params_from([[5.0, 1.0, 9.0]]), "off")
    assert sol.status == milp.INFEASIBLE and sol.x is None


def test_no_admissible_epoch_names_component():
    inst = ProblemInstance(machine_of=[0, 0], type_of=[0, 0], n_machines=1, n_types=1, t_max=3,
                           freeze=1, lead_time=1, h0=2)
    sol = build_and_solve(inst, params_from([[1, 2, 3], [1, 2, 3]], t_star=[4, 1]), "off")
    assert sol.status == milp.INFEASIBLE
    assert "[1]" in sol.message


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        build_milp(single(), params_from([[1.0, 2.0]]), "off")
    with pytest.raises(ValueError):
        build_milp(single(), params_from([[1.0, 2.0, 3.0]]), "sample", n_scenarios=0)
    with pytest.raises(ValueError):
        build_milp(single(), params_from([[1.0, 2.0, 3.0]]), "nonsense")


def test_same_solve_twice():
    inst, rlds = tight_regression_case(2)
    pp = precompute(rlds, inst.all_costs(), 0.0, inst.rho, inst.eps, inst.t_max)
    a = build_and_solve(inst, pp, "exact")
    b = build_and_solve(inst, pp, "exact")
    assert a.objective == b.objective


def test_single_repair_count_violation_flagged():
    inst = ProblemInstance(machine_of=[0, 0], type_of=[0, 0], n_machines=1, n_types=1, t_max=3,
                           freeze=1, lead_time=1, h0=2)
    pp = params_from([[1.0, 5.0, 5.0], [1.0, 5.0, 5.0]])
    sol = solve(build_milp(inst, pp, "off", inventory=False))
    assert verify_solution(inst, pp, sol).ok
    assert sol.repair_epochs() == [1, 1]
    sol.x[1, :] = 0  # component 1 left unscheduled; crew and shutdown rows still hold
    sol.objective = None
    rep = verify_solution(inst, pp, sol)
    assert len(rep.violations) == 1 and rep.violations[0].startswith("one-repair")


def test_invariants_hold_on_random_toys():
    rng = np.random.default_rng(11)
    for _ in range(15):
        inst, pp = random_toy(rng, n_components=3, t_max=5, n_types=2, lead_time=2)
        sol = build_and_solve(inst, pp, "exact")
        if not sol.feasible:
            continue
        rep = verify_solution(inst, pp, sol)
        assert rep.ok, rep.violations
        assert rep.a_mismatch <= 1e-6


def test_brute_force_small():
    rng = np.random.default_rng(21)
    for _ in range(4):
        inst, pp = random_toy(rng, n_components=2, t_max=3, n_types=1, lead_time=1)
        best, _ = enumerate_plans(inst, pp.psi, pp.t_star, pp.p_bar)
        sol = build_and_solve(inst, pp, "exact")
        if best == np.inf:
            assert sol.status == milp.INFEASIBLE
        else:
            assert sol.objective == pytest.approx(best, abs=1e-6)


def test_removing_z2_never_increases_objective():
    for seed in range(3):
        inst, rlds = tight_regression_case(seed)
        pp = precompute(rlds, inst.all_costs(), 0.0, inst.rho, inst.eps, inst.t_max)
        assert build_and_solve(inst, pp, "off").objective <= build_and_solve(inst, pp, "exact").objective + 1e-9


def test_objective_monotone_in_delta():
    for inst, rlds in regression_suite(3):
        objs = []
        for d in (0.0, 0.1, 0.2, 0.4):
            pp = precompute(rlds, inst.all_costs(), d, inst.rho, inst.eps, inst.t_max)
            objs.append(build_and_solve(inst, pp, "exact").objective)
        assert all(b >= a - 1e-9 for a, b in zip(objs, objs[1:]))
    # a gamma=0 case turns infeasible once the radius moves the early samples to zero
    inst, rlds = tight_regression_case(4)
    pp = precompute(rlds, inst.all_costs(), 0.1, inst.rho, inst.eps, inst.t_max)
    assert build_and_solve(inst, pp, "exact").status == milp.INFEASIBLE


def test_component_order_is_irrelevant():
    inst, rlds = tight_regression_case(5)
    pp = precompute(rlds, inst.all_costs(), 0.0, inst.rho, inst.eps, inst.t_max)
    base = build_and_solve(inst, pp, "exact").objective
    perm = np.random.default_rng(0).permutation(inst.J)
    inst2 = ProblemInstance.from_dict({**inst.to_dict(),
                                       "machine_of": [inst.machine_of[j] for j in perm],
                                       "type_of": [inst.type_of[j] for j in perm]})
    pp2 = params_from(pp.psi[perm], pp.t_star[perm], pp.p_bar[perm])
    assert build_and_solve(inst2, pp2, "exact").objective == pytest.approx(base, abs=1e-9)


def test_sample_mode_agrees_with_exact_for_large_s():
    inst, rlds = tight_regression_case(0)
    pp = precompute(rlds, inst.all_costs(), 0.0, inst.rho, inst.eps, inst.t_max)
    eta = draw_scenarios(pp.p_bar, 2000, seed=1)
    allowed = int(inst.beta * 2000)
    for n_late in range(inst.J + 1):
        epochs = [20] * n_late + [1] * (inst.J - n_late)
        _, exact_ok = check_z2_probability(epochs, pp.p_bar, inst.gamma, inst.beta)
        hits = sum(eta[:, j, t - 1] for j, t in enumerate(epochs))
        sample_ok = int(np.sum(hits > inst.gamma)) <= allowed
        assert exact_ok == sample_ok


def test_scenarios_are_monotone_and_independent():
    pb = np.array([[0.1, 0.5, 0.9], [0.2, 0.2, 0.7]])
    eta = draw_scenarios(pb, 20000, seed=3)
    assert np.all(np.diff(eta.astype(int), axis=2) >= 0)
    np.testing.assert_allclose(eta.mean(axis=0), pb, atol=0.015)
    joint = np.mean(eta[:, 0, 1] & eta[:, 1, 2])
    assert joint == pytest.approx(0.5 * 0.7, abs=0.015)


def test_inventory_only_model():
    inst = ProblemInstance(machine_of=[0, 1], type_of=[0, 0], n_machines=2, n_types=1, t_max=4,
                           freeze=1, lead_time=1, h0=0, c_hold=0.1, c_reg=1.0, c_exp=5.0, b_reg=1.0)
    sched = np.zeros((2, 4), dtype=int)
    sched[0, 2] = sched[1, 3] = 1
    sol = solve(build_inventory_milp(inst, sched))
    # one regular order of two units at epoch 2, held one epoch: 1 + 2 + 0.1
    assert sol.objective == pytest.approx(3.1)
    assert np.array_equal(sol.x, sched)


def test_instance_validation_and_io(tmp_path):
    with pytest.raises(ValueError):
        single(freeze=0)
    with pytest.raises(ValueError):
        single(beta=1.0)
    with pytest.raises(ValueError):
        single(c_crew=-1.0)
    with pytest.raises(ValueError):
        ProblemInstance(machine_of=[0], type_of=[1], n_machines=1, n_types=1)
    inst = single(lead_time=0)
    inst.write(tmp_path / "i.json")
    assert ProblemInstance.read(tmp_path / "i.json") == inst


def test_solution_roundtrip(tmp_path):
    inst, rlds = tight_regression_case(1)
    pp = precompute(rlds, inst.all_costs(), 0.0, inst.rho, inst.eps, inst.t_max)
    sol = build_and_solve(inst, pp, "exact")
    sol.write(tmp_path / "s.json")
    back = Solution.read(tmp_path / "s.json")
    assert back.repair_epochs() == sol.repair_epochs()
    assert back.a_final == sol.a_final and back.a == sol.a
    assert verify_solution(inst, pp, back).ok


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_exact_z2_matches_recursion(seed):
    rng = np.random.default_rng(seed)
    inst, pp = random_toy(rng, n_components=int(rng.integers(2, 6)), t_max=6)
    sol = build_and_solve(inst, pp, "exact")
    if sol.feasible:
        prob, ok = check_z2_probability(sol.repair_epochs(), pp.p_bar, inst.gamma, inst.beta)
        assert abs(sol.a_final - prob) <= 1e-6 and ok
