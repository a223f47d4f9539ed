"""Newton-Raphson power flow and equilibrium initialization of the dynamic model.

The power flow solves the static network in polar form; the equilibrium
initializer then places every classical machine's internal voltage behind its
transient reactance, sets the mechanical power to the electrical power at the
operating point, and converts scheduled loads into constant admittances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import CaseFile, build_admittance
from .errors import NumericalError, ValidationError
from .models import (
    ControlInput,
    Load,
    Machine,
    MachineState,
    StaticLoadParams,
    System,
    classical_f,
)


@dataclass
class PowerFlowSolution:
    """Converged operating point of the static network."""

    v: np.ndarray                 # complex bus voltages
    S_inj: np.ndarray             # complex net injections V .* conj(Y V)
    machine_S: list               # complex generated power per machine (case order)
    machine_I: list               # complex injection current per machine
    mismatch_norm: float
    iterations: int
    mismatch_history: list


def _schedules(case: CaseFile):
    idx = case.bus_index()
    P = np.zeros(case.n)
    Q = np.zeros(case.n)
    for m in case.machines:
        P[idx[m.bus]] += m.P_m
    for ld in case.loads:
        P[idx[ld.bus]] -= ld.p
        Q[idx[ld.bus]] -= ld.q
    return P, Q


def power_flow(case: CaseFile, tol: float = 1e-10, max_iter: int = 20) -> PowerFlowSolution:
    """Polar Newton-Raphson from a flat start.

    Raises NumericalError with the mismatch history if the iteration does not
    reach ``tol`` (infinity norm over active power at PV/PQ buses and reactive
    power at PQ buses) within ``max_iter`` steps.
    """
    case.validate()
    Y = build_admittance(case).toarray()
    idx = case.bus_index()
    n = case.n
    types = [b.type for b in case.buses]
    pv = np.array([i for i, t in enumerate(types) if t == "pv"], dtype=int)
    pq = np.array([i for i, t in enumerate(types) if t == "pq"], dtype=int)
    pvpq = np.concatenate([pv, pq])

    P_sched, Q_sched = _schedules(case)

    Vm = np.ones(n)
    for b in case.buses:
        if b.type in ("slack", "pv"):
            Vm[idx[b.id]] = b.v_set
    Va = np.zeros(n)

    history = []
    for iteration in range(max_iter + 1):
        v = Vm * np.exp(1j * Va)
        I = Y @ v
        S = v * np.conj(I)
        mis = np.concatenate([(S.real - P_sched)[pvpq], (S.imag - Q_sched)[pq]])
        norm = float(np.max(np.abs(mis))) if mis.size else 0.0
        history.append(norm)
        if norm < tol:
            return _solution(case, Y, v, S, norm, iteration, history)
        if iteration == max_iter:
            break

        diagV = np.diag(v)
        diagI = np.diag(I)
        diagE = np.diag(np.exp(1j * Va))
        dS_dVa = 1j * diagV @ np.conj(diagI - Y @ diagV)
        dS_dVm = diagV @ np.conj(Y @ diagE) + np.conj(diagI) @ diagE

        J11 = dS_dVa[np.ix_(pvpq, pvpq)].real
        J12 = dS_dVm[np.ix_(pvpq, pq)].real
        J21 = dS_dVa[np.ix_(pq, pvpq)].imag
        J22 = dS_dVm[np.ix_(pq, pq)].imag
        J = np.block([[J11, J12], [J21, J22]])
        try:
            dx = np.linalg.solve(J, -mis)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"power flow Jacobian singular at iteration {iteration}") from exc
        Va[pvpq] += dx[: pvpq.size]
        Vm[pq] += dx[pvpq.size:]

    raise NumericalError(
        f"power flow did not converge in {max_iter} iterations; mismatch history: "
        + ", ".join(f"{m:.3e}" for m in history)
    )


def _solution(case, Y, v, S, norm, iterations, history) -> PowerFlowSolution:
    idx = case.bus_index()
    load_S = np.zeros(case.n, dtype=complex)
    for ld in case.loads:
        load_S[idx[ld.bus]] += complex(ld.p, ld.q)
    machine_S, machine_I = [], []
    for m in case.machines:
        b = idx[m.bus]
        Sg = S[b] + load_S[b]
        machine_S.append(Sg)
        machine_I.append(np.conj(Sg) / np.conj(v[b]))
    return PowerFlowSolution(
        v=v, S_inj=S, machine_S=machine_S, machine_I=machine_I,
        mismatch_norm=norm, iterations=iterations, mismatch_history=history,
    )


def branch_flow_mismatch(case: CaseFile, v) -> np.ndarray:
    """Scheduled-minus-computed injections summed branch by branch.

    Independent of the assembled admittance matrix: every branch/shunt flow is
    computed from its primitive parameters.  Returns the complex mismatch per
    bus; entries at the slack (P and Q) and at PV buses (Q) are not scheduled
    quantities and are zeroed.
    """
    idx = case.bus_index()
    v = np.asarray(v, dtype=complex)
    S_flow = np.zeros(case.n, dtype=complex)
    for br in case.branches:
        i, j = idx[br.from_bus], idx[br.to_bus]
        y = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b
        S_flow[i] += v[i] * np.conj(y * (v[i] - v[j]) + ysh * v[i])
        S_flow[j] += v[j] * np.conj(y * (v[j] - v[i]) + ysh * v[j])
    for sh in case.shunts:
        i = idx[sh.bus]
        S_flow[i] += v[i] * np.conj(complex(sh.g, sh.b) * v[i])
    P_sched, Q_sched = _schedules(case)
    mis = (P_sched - S_flow.real) + 1j * (Q_sched - S_flow.imag)
    for i, b in enumerate(case.buses):
        if b.type == "slack":
            mis[i] = 0.0
        elif b.type == "pv":
            mis[i] = complex(mis[i].real, 0.0)
    return mis


@dataclass
class EquilibriumInit:
    """Dynamic system assembled at (and consistent with) a power-flow point."""

    case: CaseFile
    system: System
    x0_all: list
    v0: np.ndarray

    def disturbed(self, machine: int = 0, factor: float = 0.5) -> "EquilibriumInit":
        return apply_disturbance(self, machine=machine, factor=factor)


def init_equilibrium(case: CaseFile, pf: PowerFlowSolution,
                     residual_tol: float = 1e-8) -> EquilibriumInit:
    """Machine states, control inputs, and load admittances at the operating point.

    For each classical machine the internal voltage is E' = v + (R_s + j X_d')
    i, giving E_q0' = |E'|, delta_0 = arg(E'), delta_omega_0 = 0, and the
    mechanical power equals the electrical power so that all derivatives
    vanish.  The vanishing is asserted to ``residual_tol``.
    """
    idx = case.bus_index()
    omega_s = case.omega_s
    machines, x0_all = [], []
    for spec, Sg, Ig in zip(case.machines, pf.machine_S, pf.machine_I):
        if spec.model != "classical":
            raise ValidationError(
                f"machine at bus {spec.bus}: equilibrium initialization supports classical machines only"
            )
        b = idx[spec.bus]
        vb = pf.v[b]
        params = spec.params(omega_s)
        E = vb + complex(params.R_s, params.X_d_p) * Ig
        E_q0 = abs(E)
        delta0 = float(np.angle(E))
        P_e = float((vb * np.conj(Ig)).real + params.R_s * abs(Ig) ** 2)
        u = ControlInput(P_m=P_e, E_fd=spec.E_fd)
        machine = Machine(bus=b, params=params, u=u, E_q0_p=E_q0,
                          name=f"gen{spec.bus}")
        x0 = np.array([delta0, 0.0])
        resid = classical_f(machine.state(x0), vb, params, u)
        if np.linalg.norm(resid) > residual_tol:
            raise NumericalError(
                f"{machine.name}: equilibrium residual {np.linalg.norm(resid):.3e} "
                f"exceeds {residual_tol:.1e}"
            )
        machines.append(machine)
        x0_all.append(x0)

    loads = []
    for ld in case.loads:
        b = idx[ld.bus]
        loads.append(Load(StaticLoadParams.from_power(b, complex(ld.p, ld.q), pf.v[b])))

    system = System(Y=build_admittance(case), machines=machines, loads=loads)
    return EquilibriumInit(case=case, system=system, x0_all=x0_all, v0=pf.v.copy())


def apply_disturbance(init: EquilibriumInit, machine: int = 0, factor: float = 0.5) -> EquilibriumInit:
    """Scale one machine's mechanical power; everything else is untouched."""
    machines = list(init.system.machines)
    target = machines[machine]
    machines[machine] = target.with_control(
        ControlInput(P_m=factor * target.u.P_m, E_fd=target.u.E_fd)
    )
    system = System(Y=init.system.Y, machines=machines, loads=list(init.system.loads))
    return EquilibriumInit(
        case=init.case, system=system,
        x0_all=[x.copy() for x in init.x0_all], v0=init.v0.copy(),
    )


def prepare_case(case: CaseFile, disturbed: bool = False) -> EquilibriumInit:
    """Power flow + equilibrium init (+ the standard 50% P_m disturbance)."""
    pf = power_flow(case)
    init = init_equilibrium(case, pf)
    return apply_disturbance(init) if disturbed else init
