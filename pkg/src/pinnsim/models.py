"""Dynamic and static power-system components and the network current map.

Sign conventions: component injections are positive into the bus; the current
balance at a bus reads i_component - i_network = 0 with i_network = Y v.
All machine functions broadcast, so scalar states and batched arrays go
through the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import ModelError, ValidationError

OMEGA_S_60HZ = 2.0 * np.pi * 60.0


@dataclass(frozen=True)
class MachineParams:
    """Synchronous-machine constants (per unit except H, T in seconds)."""

    H: float
    D: float
    X_d: float
    X_d_p: float
    X_q: float
    X_q_p: float
    T_do_p: float = 0.0
    T_qo_p: float = 0.0
    R_s: float = 0.0
    omega_s: float = OMEGA_S_60HZ
    classical: bool = False

    def __post_init__(self):
        if not self.H > 0:
            raise ModelError(f"inertia constant must be positive, got H={self.H}")
        if not self.X_d_p > 0:
            raise ModelError(f"transient reactance must be positive, got X_d_p={self.X_d_p}")
        if self.classical:
            if self.X_q_p != self.X_d_p or self.X_q != self.X_d_p:
                raise ModelError(
                    "classical reduction requires X_q_p == X_d_p and X_q == X_d_p "
                    f"(got X_q_p={self.X_q_p}, X_q={self.X_q}, X_d_p={self.X_d_p})"
                )
        else:
            if not (self.T_do_p > 0 and self.T_qo_p > 0):
                raise ModelError("two-axis model requires positive T_do_p and T_qo_p")
        if self.R_s**2 + self.X_d_p * self.X_q_p == 0:
            raise ModelError("singular dq impedance matrix (R_s^2 + X_d_p * X_q_p = 0)")

    @classmethod
    def classical_machine(cls, H, D, X_d, X_d_p, R_s=0.0, omega_s=OMEGA_S_60HZ):
        """Classical-reduction parameters: X_q and X_q_p collapse onto X_d_p."""
        return cls(H=H, D=D, X_d=X_d, X_d_p=X_d_p, X_q=X_d_p, X_q_p=X_d_p,
                   R_s=R_s, omega_s=omega_s, classical=True)

    @property
    def state_dim(self) -> int:
        return 2 if self.classical else 4


@dataclass(frozen=True)
class ControlInput:
    """Mechanical power and excitation voltage set points."""

    P_m: float
    E_fd: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.P_m) and np.isfinite(self.E_fd)):
            raise ModelError("control inputs must be finite")


@dataclass
class MachineState:
    """Rotor state; E_q_p/E_d_p are frozen constants under the classical reduction.

    Fields may hold arrays of matching shape for batched evaluation.
    """

    delta: float | np.ndarray
    delta_omega: float | np.ndarray
    E_q_p: float | np.ndarray = 0.0
    E_d_p: float | np.ndarray = 0.0


def _minv(params: MachineParams):
    """Inverse of the dq impedance matrix [[R_s, -X_q_p], [X_d_p, R_s]]."""
    det = params.R_s**2 + params.X_d_p * params.X_q_p
    if det == 0:
        raise ModelError("singular dq impedance matrix")
    return (
        np.array([[params.R_s, params.X_q_p], [-params.X_d_p, params.R_s]]) / det
    )


def dq_currents(state: MachineState, v, params: MachineParams):
    """Stator-algebra solution for (I_d, I_q) given internal voltages and bus voltage."""
    v = np.asarray(v, dtype=complex)
    sin_d, cos_d = np.sin(state.delta), np.cos(state.delta)
    # V sin(delta - theta) and V cos(delta - theta) in rectangular coordinates
    b_d = state.E_d_p - (v.real * sin_d - v.imag * cos_d)
    b_q = state.E_q_p - (v.real * cos_d + v.imag * sin_d)
    M = _minv(params)
    I_d = M[0, 0] * b_d + M[0, 1] * b_q
    I_q = M[1, 0] * b_d + M[1, 1] * b_q
    return I_d, I_q


def _electrical_power(state, I_d, I_q, params):
    return (
        state.E_d_p * I_d
        + state.E_q_p * I_q
        + (params.X_q_p - params.X_d_p) * I_d * I_q
    )


def two_axis_f(state: MachineState, v, params: MachineParams, u: ControlInput):
    """Time derivative of (E_q_p, E_d_p, delta, delta_omega)."""
    if params.classical:
        raise ModelError("two_axis_f requires two-axis parameters")
    I_d, I_q = dq_currents(state, v, params)
    dE_q = (-state.E_q_p - (params.X_d - params.X_d_p) * I_d + u.E_fd) / params.T_do_p
    dE_d = (-state.E_d_p + (params.X_q - params.X_q_p) * I_q) / params.T_qo_p
    ddelta = params.omega_s * state.delta_omega
    P_e = _electrical_power(state, I_d, I_q, params)
    ddomega = (u.P_m - P_e - params.D * state.delta_omega) / (2.0 * params.H)
    return np.stack(np.broadcast_arrays(dE_q, dE_d, ddelta, ddomega), axis=-1)


def classical_f(state: MachineState, v, params: MachineParams, u: ControlInput):
    """Time derivative of (delta, delta_omega) with frozen internal voltages."""
    if not params.classical:
        raise ModelError("classical_f requires the classical-reduction flag")
    I_d, I_q = dq_currents(state, v, params)
    ddelta = params.omega_s * state.delta_omega
    P_e = _electrical_power(state, I_d, I_q, params)
    ddomega = (u.P_m - P_e - params.D * state.delta_omega) / (2.0 * params.H)
    return np.stack(np.broadcast_arrays(ddelta, ddomega), axis=-1)


def machine_h(state: MachineState, v, params: MachineParams):
    """Injection current in network coordinates, (I_d + j I_q) e^{j(delta - pi/2)}."""
    I_d, I_q = dq_currents(state, v, params)
    return (I_d + 1j * I_q) * np.exp(1j * (state.delta - 0.5 * np.pi))


def classical_h(state: MachineState, v, params: MachineParams):
    if not params.classical:
        raise ModelError("classical_h requires the classical-reduction flag")
    return machine_h(state, v, params)


def two_axis_h(state: MachineState, v, params: MachineParams):
    if params.classical:
        raise ModelError("two_axis_h requires two-axis parameters")
    return machine_h(state, v, params)


def _dq_current_partials(state, v, params):
    """Partials of (I_d, I_q) w.r.t. delta, E_d_p, E_q_p, Re v, Im v.

    Returns a dict of (..., 2) arrays (last axis: d/q component).
    """
    v = np.asarray(v, dtype=complex)
    sin_d, cos_d = np.sin(state.delta), np.cos(state.delta)
    vsin = v.real * sin_d - v.imag * cos_d   # V sin(delta - theta)
    vcos = v.real * cos_d + v.imag * sin_d   # V cos(delta - theta)
    M = _minv(params)

    def apply(db_d, db_q):
        return np.stack(
            np.broadcast_arrays(
                M[0, 0] * db_d + M[0, 1] * db_q,
                M[1, 0] * db_d + M[1, 1] * db_q,
            ),
            axis=-1,
        )

    zeros = np.zeros(np.broadcast_shapes(np.shape(state.delta), v.shape))
    return {
        "delta": apply(-vcos, vsin),
        "E_d_p": apply(np.ones_like(zeros), zeros),
        "E_q_p": apply(zeros, np.ones_like(zeros)),
        "v_re": apply(-sin_d + zeros, -cos_d + zeros),
        "v_im": apply(cos_d + zeros, sin_d + zeros),
    }


def _power_partial(state, I, dI, dE_d=0.0, dE_q=0.0, params=None):
    """Partial of P_e along a direction with current partial dI (..., 2)."""
    I_d, I_q = I
    x = params.X_q_p - params.X_d_p
    return (
        dE_d * I_d
        + state.E_d_p * dI[..., 0]
        + dE_q * I_q
        + state.E_q_p * dI[..., 1]
        + x * (dI[..., 0] * I_q + I_d * dI[..., 1])
    )


def machine_f_jacobians(state: MachineState, v, params: MachineParams, u: ControlInput):
    """Analytic (df/dx, df/d(Re v, Im v)) for the model picked by params.classical.

    Shapes: (..., p, p) and (..., p, 2) with p = params.state_dim; the state
    ordering is (delta, delta_omega) classical, (E_q_p, E_d_p, delta,
    delta_omega) two-axis.
    """
    I = dq_currents(state, v, params)
    dI = _dq_current_partials(state, v, params)
    shape = np.broadcast_shapes(np.shape(state.delta), np.shape(np.asarray(v)))
    twoH = 2.0 * params.H

    dP = {key: _power_partial(state, I, dI[key], params=params) for key in ("delta", "v_re", "v_im")}
    dP["E_d_p"] = _power_partial(state, I, dI["E_d_p"], dE_d=1.0, params=params)
    dP["E_q_p"] = _power_partial(state, I, dI["E_q_p"], dE_q=1.0, params=params)

    if params.classical:
        f_x = np.zeros(shape + (2, 2))
        f_x[..., 0, 1] = params.omega_s
        f_x[..., 1, 0] = -dP["delta"] / twoH
        f_x[..., 1, 1] = -params.D / twoH
        f_v = np.zeros(shape + (2, 2))
        f_v[..., 1, 0] = -dP["v_re"] / twoH
        f_v[..., 1, 1] = -dP["v_im"] / twoH
        return f_x, f_v

    kd = params.X_d - params.X_d_p
    kq = params.X_q - params.X_q_p
    f_x = np.zeros(shape + (4, 4))
    # row 0: dE_q' equation
    f_x[..., 0, 0] = (-1.0 - kd * dI["E_q_p"][..., 0]) / params.T_do_p
    f_x[..., 0, 1] = -kd * dI["E_d_p"][..., 0] / params.T_do_p
    f_x[..., 0, 2] = -kd * dI["delta"][..., 0] / params.T_do_p
    # row 1: dE_d' equation
    f_x[..., 1, 0] = kq * dI["E_q_p"][..., 1] / params.T_qo_p
    f_x[..., 1, 1] = (-1.0 + kq * dI["E_d_p"][..., 1]) / params.T_qo_p
    f_x[..., 1, 2] = kq * dI["delta"][..., 1] / params.T_qo_p
    # row 2: rotor angle
    f_x[..., 2, 3] = params.omega_s
    # row 3: acceleration
    f_x[..., 3, 0] = -dP["E_q_p"] / twoH
    f_x[..., 3, 1] = -dP["E_d_p"] / twoH
    f_x[..., 3, 2] = -dP["delta"] / twoH
    f_x[..., 3, 3] = -params.D / twoH

    f_v = np.zeros(shape + (4, 2))
    f_v[..., 0, 0] = -kd * dI["v_re"][..., 0] / params.T_do_p
    f_v[..., 0, 1] = -kd * dI["v_im"][..., 0] / params.T_do_p
    f_v[..., 1, 0] = kq * dI["v_re"][..., 1] / params.T_qo_p
    f_v[..., 1, 1] = kq * dI["v_im"][..., 1] / params.T_qo_p
    f_v[..., 3, 0] = -dP["v_re"] / twoH
    f_v[..., 3, 1] = -dP["v_im"] / twoH
    return f_x, f_v


def machine_h_jacobians(state: MachineState, v, params: MachineParams):
    """Analytic (dh/dx, dh/d(Re v, Im v)) of the real/imag injection parts.

    Shapes: (..., 2, p) and (..., 2, 2); rows are (Re h, Im h).
    """
    I_d, I_q = dq_currents(state, v, params)
    dI = _dq_current_partials(state, v, params)
    rot = np.exp(1j * (state.delta - 0.5 * np.pi))
    h = (I_d + 1j * I_q) * rot

    def rotate(dpair):
        return (dpair[..., 0] + 1j * dpair[..., 1]) * rot

    dh_delta = rotate(dI["delta"]) + 1j * h
    dh_vre = rotate(dI["v_re"])
    dh_vim = rotate(dI["v_im"])

    shape = np.broadcast_shapes(np.shape(state.delta), np.shape(np.asarray(v)))
    if params.classical:
        h_x = np.zeros(shape + (2, 2))
        h_x[..., 0, 0] = dh_delta.real
        h_x[..., 1, 0] = dh_delta.imag
    else:
        h_x = np.zeros(shape + (2, 4))
        dh_Eq = rotate(dI["E_q_p"])
        dh_Ed = rotate(dI["E_d_p"])
        h_x[..., 0, 0] = dh_Eq.real
        h_x[..., 1, 0] = dh_Eq.imag
        h_x[..., 0, 1] = dh_Ed.real
        h_x[..., 1, 1] = dh_Ed.imag
        h_x[..., 0, 2] = dh_delta.real
        h_x[..., 1, 2] = dh_delta.imag
    h_v = np.zeros(shape + (2, 2))
    h_v[..., 0, 0] = dh_vre.real
    h_v[..., 1, 0] = dh_vre.imag
    h_v[..., 0, 1] = dh_vim.real
    h_v[..., 1, 1] = dh_vim.imag
    return h_x, h_v


@dataclass(frozen=True)
class StaticLoadParams:
    """Constant-impedance load; admittance fixed from the scheduled power."""

    bus: int
    Y_load: complex

    def __post_init__(self):
        if np.real(self.Y_load) < 0:
            raise ModelError(f"passive load requires Re(Y_load) >= 0, got {self.Y_load}")

    @classmethod
    def from_power(cls, bus: int, S: complex, v: complex) -> "StaticLoadParams":
        """Admittance conj(S)/|v|^2 reproducing the scheduled consumption at v."""
        return cls(bus=bus, Y_load=np.conj(S) / abs(v) ** 2)


def load_h(v, params: StaticLoadParams):
    """Injection of a constant-impedance load: consumption is negative injection."""
    return -params.Y_load * np.asarray(v, dtype=complex)


def load_h_jacobian(params: StaticLoadParams) -> np.ndarray:
    """d(Re h, Im h)/d(Re v, Im v) of the load injection (constant 2x2)."""
    c = -params.Y_load
    return np.array([[c.real, -c.imag], [c.imag, c.real]])


def network_currents(Y, v):
    """Network injections Y v for a sparse admittance matrix."""
    v = np.asarray(v, dtype=complex)
    if Y.shape[1] != v.shape[0]:
        raise ValidationError(f"voltage vector length {v.shape[0]} does not match Y {Y.shape}")
    return Y @ v


class Machine:
    """A machine attached to a bus: parameters, control input, frozen internal voltages.

    Wraps the free-function model with the state-vector layout used by the
    integrators: (delta, delta_omega) classical, (E_q_p, E_d_p, delta,
    delta_omega) two-axis.
    """

    def __init__(self, bus: int, params: MachineParams, u: ControlInput,
                 E_q0_p: float = 0.0, E_d0_p: float = 0.0, name: str | None = None):
        self.bus = bus
        self.params = params
        self.u = u
        self.E_q0_p = float(E_q0_p)
        self.E_d0_p = float(E_d0_p)
        self.name = name or f"machine_bus{bus}"

    @property
    def state_dim(self) -> int:
        return self.params.state_dim

    @property
    def domega_index(self) -> int:
        """Index of delta_omega within the state vector."""
        return 1 if self.params.classical else 3

    @property
    def delta_index(self) -> int:
        return 0 if self.params.classical else 2

    def state(self, x) -> MachineState:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.state_dim:
            raise ValidationError(
                f"{self.name}: state vector has {x.shape[-1]} entries, expected {self.state_dim}"
            )
        if self.params.classical:
            return MachineState(delta=x[..., 0], delta_omega=x[..., 1],
                                E_q_p=self.E_q0_p, E_d_p=self.E_d0_p)
        return MachineState(delta=x[..., 2], delta_omega=x[..., 3],
                            E_q_p=x[..., 0], E_d_p=x[..., 1])

    def f(self, x, v):
        s = self.state(x)
        if self.params.classical:
            return classical_f(s, v, self.params, self.u)
        return two_axis_f(s, v, self.params, self.u)

    def h(self, x, v):
        return machine_h(self.state(x), v, self.params)

    def f_jacobians(self, x, v):
        return machine_f_jacobians(self.state(x), v, self.params, self.u)

    def h_jacobians(self, x, v):
        return machine_h_jacobians(self.state(x), v, self.params)

    def with_control(self, u: ControlInput) -> "Machine":
        return Machine(self.bus, self.params, u, self.E_q0_p, self.E_d0_p, self.name)

    def fingerprint(self) -> dict:
        """Identifying data recorded in trained-weight metadata."""
        return {
            "name": self.name,
            "bus": self.bus,
            "classical": self.params.classical,
            "H": self.params.H,
            "D": self.params.D,
            "X_d": self.params.X_d,
            "X_d_p": self.params.X_d_p,
            "X_q": self.params.X_q,
            "X_q_p": self.params.X_q_p,
            "R_s": self.params.R_s,
            "omega_s": self.params.omega_s,
            "E_q0_p": self.E_q0_p,
            "E_d0_p": self.E_d0_p,
            "P_m": self.u.P_m,
            "E_fd": self.u.E_fd,
        }


class Load:
    """Constant-impedance static component."""

    def __init__(self, params: StaticLoadParams):
        self.params = params
        self.bus = params.bus

    def h(self, v):
        return load_h(v, self.params)

    def h_jacobian(self) -> np.ndarray:
        return load_h_jacobian(self.params)


@dataclass
class System:
    """Bus-level view of the grid: admittance matrix plus attached components."""

    Y: sp.csr_matrix
    machines: list
    loads: list

    def __post_init__(self):
        self.Y = sp.csr_matrix(self.Y)
        n = self.Y.shape[0]
        if self.Y.shape != (n, n):
            raise ValidationError("admittance matrix must be square")
        for m in self.machines:
            if not 0 <= m.bus < n:
                raise ValidationError(f"machine bus {m.bus} outside 0..{n - 1}")
        for ld in self.loads:
            if not 0 <= ld.bus < n:
                raise ValidationError(f"load bus {ld.bus} outside 0..{n - 1}")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def state_dims(self) -> list:
        return [m.state_dim for m in self.machines]

    @property
    def state_offsets(self) -> list:
        offsets, acc = [], 0
        for m in self.machines:
            offsets.append(acc)
            acc += m.state_dim
        return offsets

    @property
    def total_state_dim(self) -> int:
        return sum(self.state_dims)

    def split_states(self, x_concat) -> list:
        x_concat = np.asarray(x_concat, dtype=float)
        return [
            x_concat[..., off:off + m.state_dim]
            for off, m in zip(self.state_offsets, self.machines)
        ]

    def concat_states(self, x_all) -> np.ndarray:
        return np.concatenate([np.asarray(x) for x in x_all], axis=-1)

    def component_currents(self, x_all, v):
        """Summed component injections per bus; v may be (n,) or (n, s)."""
        v = np.asarray(v, dtype=complex)
        i_c = np.zeros_like(v)
        for m, x in zip(self.machines, x_all):
            i_c[m.bus] += m.h(np.asarray(x), v[m.bus])
        for ld in self.loads:
            i_c[ld.bus] += ld.h(v[ld.bus])
        return i_c

    def current_balance(self, x_all, v):
        """Component minus network injections (zero at a consistent point)."""
        return self.component_currents(x_all, v) - network_currents(self.Y, v)

    def adjacency(self) -> np.ndarray:
        """Boolean coupling pattern: Y nonzeros united with the diagonal."""
        pattern = np.asarray(abs(self.Y.toarray()) > 0)
        np.fill_diagonal(pattern, True)
        return pattern
