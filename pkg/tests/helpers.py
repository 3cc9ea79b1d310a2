"""Instance builders shared by the test modules."""

import numpy as np

from jointcbm.dro import PrecomputedParams
from jointcbm.model import ProblemInstance


def params_from(psi, t_star=None, p_bar=None):
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    J, T = psi.shape
    ts = np.full(J, T + 1) if t_star is None else np.asarray(t_star, dtype=int)
    pb = np.zeros((J, T)) if p_bar is None else np.atleast_2d(np.asarray(p_bar, dtype=float))
    return PrecomputedParams(psi=psi, t_star=ts, p_bar=pb)


def random_toy(rng, n_components=2, t_max=4, n_types=1, lead_time=1, gamma=None):
    """Random instance and parameters small enough for exhaustive enumeration."""
    J = n_components
    machine_of = [int(rng.integers(0, 2)) for _ in range(J)]
    n_machines = max(machine_of) + 1
    type_of = [j % n_types for j in range(J)]
    inst = ProblemInstance(
        machine_of=machine_of, type_of=type_of, n_machines=n_machines, n_types=n_types,
        t_max=t_max, freeze=1, lead_time=lead_time, crew_capacity=int(rng.integers(1, 3)),
        supplier_capacity=[float(rng.integers(0, 3)) for _ in range(t_max)],
        c_down=[float(rng.uniform(0, 3)) for _ in range(n_machines)],
        c_crew=float(rng.uniform(0, 5)), c_hold=[float(rng.uniform(0, 0.5)) for _ in range(n_types)],
        c_reg=[float(rng.uniform(0.5, 2)) for _ in range(n_types)],
        c_exp=[float(rng.uniform(2, 6)) for _ in range(n_types)], b_reg=float(rng.uniform(0, 3)),
        gamma=int(rng.integers(0, J)) if gamma is None else gamma, beta=0.1,
        h0=[int(rng.integers(0, 2)) for _ in range(n_types)],
        inflight=[[int(rng.integers(0, 2)) for _ in range(lead_time)] for _ in range(n_types)])
    psi = rng.uniform(1, 10, size=(J, t_max))
    t_star = rng.integers(2, t_max + 2, size=J)
    p_bar = np.sort(rng.choice([0.0, 0.02, 0.05, 0.3, 0.9], size=(J, t_max)), axis=1)
    return inst, params_from(psi, t_star, p_bar)
