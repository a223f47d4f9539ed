"""Polynomial voltage profiles in polar form and their coefficient sensitivities.

A profile describes one bus voltage over a time step as power series in local
time tau = t - t0 for the magnitude and the angle,

    v(t) = (sum_k V_k tau^k) * exp(j * sum_k theta_k tau^k),

with k = 0..r.  The coefficient vector of a bus interleaves the two series as
(V_0, theta_0, V_1, theta_1, ..., V_r, theta_r); the system-wide vector
concatenates the per-bus blocks in ascending bus order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def _series(coeffs, tau):
    """Evaluate sum_k coeffs[..., k] * tau**k by Horner's scheme (broadcasts)."""
    coeffs = np.asarray(coeffs, dtype=float)
    tau = np.asarray(tau, dtype=float)
    out = np.broadcast_to(coeffs[..., -1], np.broadcast_shapes(coeffs[..., -1].shape, tau.shape)).copy()
    for k in range(coeffs.shape[-1] - 2, -1, -1):
        out = out * tau + coeffs[..., k]
    return out


def _series_derivative(coeffs, tau):
    """d/dtau of the power series."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] == 1:
        return np.zeros(np.broadcast_shapes(coeffs[..., 0].shape, np.shape(tau)))
    k = np.arange(1, coeffs.shape[-1])
    return _series(coeffs[..., 1:] * k, tau)


def _tau_powers(tau, r):
    """Stack (1, tau, tau^2, ..., tau^r) along a new trailing axis."""
    tau = np.asarray(tau, dtype=float)
    return np.stack([tau**k for k in range(r + 1)], axis=-1)


@dataclass(frozen=True)
class VoltageProfile:
    """Magnitude/angle power series for one bus, anchored at time t0."""

    r: int
    t0: float
    v_coeffs: np.ndarray
    theta_coeffs: np.ndarray

    def __post_init__(self):
        vc = np.atleast_1d(np.asarray(self.v_coeffs, dtype=float))
        tc = np.atleast_1d(np.asarray(self.theta_coeffs, dtype=float))
        if vc.shape != (self.r + 1,) or tc.shape != (self.r + 1,):
            raise ValidationError(
                f"profile of order r={self.r} needs {self.r + 1} coefficients per series, "
                f"got {vc.shape} and {tc.shape}"
            )
        object.__setattr__(self, "v_coeffs", vc)
        object.__setattr__(self, "theta_coeffs", tc)

    @classmethod
    def constant(cls, v: complex, r: int = 0, t0: float = 0.0) -> "VoltageProfile":
        """Profile that holds the phasor ``v`` for all t."""
        vc = np.zeros(r + 1)
        tc = np.zeros(r + 1)
        vc[0] = abs(v)
        tc[0] = np.angle(v)
        return cls(r=r, t0=t0, v_coeffs=vc, theta_coeffs=tc)

    @property
    def xi(self) -> np.ndarray:
        """Interleaved coefficient vector (V_0, theta_0, ..., V_r, theta_r)."""
        out = np.empty(2 * (self.r + 1))
        out[0::2] = self.v_coeffs
        out[1::2] = self.theta_coeffs
        return out

    @classmethod
    def from_xi(cls, xi, r: int, t0: float) -> "VoltageProfile":
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (2 * (r + 1),):
            raise ValidationError(f"expected {2 * (r + 1)} coefficients, got {xi.shape}")
        return cls(r=r, t0=t0, v_coeffs=xi[0::2], theta_coeffs=xi[1::2])


def eval_profile(profile: VoltageProfile, t):
    """Complex voltage at time(s) t."""
    tau = np.asarray(t, dtype=float) - profile.t0
    V = _series(profile.v_coeffs, tau)
    th = _series(profile.theta_coeffs, tau)
    return V * np.exp(1j * th)


def eval_profile_derivative(profile: VoltageProfile, t):
    """Analytic d/dt of the complex voltage at time(s) t."""
    tau = np.asarray(t, dtype=float) - profile.t0
    V = _series(profile.v_coeffs, tau)
    th = _series(profile.theta_coeffs, tau)
    dV = _series_derivative(profile.v_coeffs, tau)
    dth = _series_derivative(profile.theta_coeffs, tau)
    return (dV + 1j * V * dth) * np.exp(1j * th)


def _sensitivity_complex(v_coeffs, theta_coeffs, tau, r):
    """d vhat / d xi as a complex array (..., 2(r+1)), xi interleaved.

    d vhat / d V_k     = tau^k * exp(j theta(tau))
    d vhat / d theta_k = j * tau^k * vhat(tau)
    """
    V = _series(v_coeffs, tau)
    th = _series(theta_coeffs, tau)
    ph = np.exp(1j * th)
    vhat = V * ph
    pw = _tau_powers(tau, r)
    out = np.empty(pw.shape[:-1] + (2 * (r + 1),), dtype=complex)
    out[..., 0::2] = pw * ph[..., None]
    out[..., 1::2] = 1j * pw * vhat[..., None]
    return out


def profile_sensitivity(profile: VoltageProfile, t) -> np.ndarray:
    """Jacobian of (Re vhat, Im vhat) w.r.t. the interleaved coefficients.

    Returns a real array of shape (..., 2, 2(r+1)); row 0 is the real part,
    row 1 the imaginary part.
    """
    tau = np.asarray(t, dtype=float) - profile.t0
    cols = _sensitivity_complex(profile.v_coeffs, profile.theta_coeffs, tau, profile.r)
    return np.stack([cols.real, cols.imag], axis=-2)


@dataclass(frozen=True)
class SystemProfile:
    """Voltage profiles of all n buses, sharing order r and anchor t0.

    Coefficients are stored as (n, r+1) arrays; the flat view interleaves
    per-bus blocks (V_0, theta_0, ..., V_r, theta_r) in bus order.
    """

    r: int
    t0: float
    v_coeffs: np.ndarray
    theta_coeffs: np.ndarray

    def __post_init__(self):
        vc = np.atleast_2d(np.asarray(self.v_coeffs, dtype=float))
        tc = np.atleast_2d(np.asarray(self.theta_coeffs, dtype=float))
        if vc.shape[1] != self.r + 1 or tc.shape != vc.shape:
            raise ValidationError(
                f"system profile of order r={self.r} needs (n, {self.r + 1}) coefficient "
                f"arrays, got {vc.shape} and {tc.shape}"
            )
        object.__setattr__(self, "v_coeffs", vc)
        object.__setattr__(self, "theta_coeffs", tc)

    @property
    def n(self) -> int:
        return self.v_coeffs.shape[0]

    @property
    def flat(self) -> np.ndarray:
        out = np.empty((self.n, 2 * (self.r + 1)))
        out[:, 0::2] = self.v_coeffs
        out[:, 1::2] = self.theta_coeffs
        return out.reshape(-1)

    @classmethod
    def from_flat(cls, xi, n: int, r: int, t0: float) -> "SystemProfile":
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (2 * (r + 1) * n,):
            raise ValidationError(
                f"flat coefficient vector must have length {2 * (r + 1) * n}, got {xi.shape}"
            )
        blocks = xi.reshape(n, 2 * (r + 1))
        return cls(r=r, t0=t0, v_coeffs=blocks[:, 0::2], theta_coeffs=blocks[:, 1::2])

    @classmethod
    def from_profiles(cls, profiles) -> "SystemProfile":
        profiles = list(profiles)
        r, t0 = profiles[0].r, profiles[0].t0
        if any(p.r != r or p.t0 != t0 for p in profiles):
            raise ValidationError("all bus profiles must share order r and anchor t0")
        return cls(
            r=r,
            t0=t0,
            v_coeffs=np.stack([p.v_coeffs for p in profiles]),
            theta_coeffs=np.stack([p.theta_coeffs for p in profiles]),
        )

    def profile(self, bus: int) -> VoltageProfile:
        return VoltageProfile(self.r, self.t0, self.v_coeffs[bus], self.theta_coeffs[bus])

    def bus_xi(self, bus: int) -> np.ndarray:
        out = np.empty(2 * (self.r + 1))
        out[0::2] = self.v_coeffs[bus]
        out[1::2] = self.theta_coeffs[bus]
        return out

    def magnitudes(self, t):
        """Magnitude series of all buses at time(s) t; shape (n,) or (n, len(t))."""
        tau = np.asarray(t, dtype=float) - self.t0
        return _series(self.v_coeffs[:, None, :] if tau.ndim else self.v_coeffs, tau)

    def eval(self, t):
        """Complex voltages of all buses at time(s) t; shape (n,) or (n, len(t))."""
        tau = np.asarray(t, dtype=float) - self.t0
        vc = self.v_coeffs[:, None, :] if tau.ndim else self.v_coeffs
        tc = self.theta_coeffs[:, None, :] if tau.ndim else self.theta_coeffs
        V = _series(vc, tau)
        th = _series(tc, tau)
        return V * np.exp(1j * th)

    def sensitivity(self, t) -> np.ndarray:
        """Complex d vhat_i / d xi_i for all buses; shape (n, ..., 2(r+1))."""
        tau = np.asarray(t, dtype=float) - self.t0
        vc = self.v_coeffs[:, None, :] if tau.ndim else self.v_coeffs
        tc = self.theta_coeffs[:, None, :] if tau.ndim else self.theta_coeffs
        return _sensitivity_complex(vc, tc, tau, self.r)

    def reanchored(self, new_t0: float) -> "SystemProfile":
        """Same polynomial voltages, expressed in local time relative to new_t0."""
        d = new_t0 - self.t0
        shift = _shift_matrix(self.r, d)
        return SystemProfile(
            r=self.r,
            t0=new_t0,
            v_coeffs=self.v_coeffs @ shift.T,
            theta_coeffs=self.theta_coeffs @ shift.T,
        )


def _shift_matrix(r: int, d: float) -> np.ndarray:
    """Matrix S with (S c)_k = sum_{m>=k} C(m,k) d^(m-k) c_m (polynomial re-anchoring)."""
    from math import comb

    S = np.zeros((r + 1, r + 1))
    for k in range(r + 1):
        for m in range(k, r + 1):
            S[k, m] = comb(m, k) * d ** (m - k)
    return S


def pack(profiles) -> np.ndarray:
    """Concatenate per-bus coefficient vectors into the flat system vector."""
    if isinstance(profiles, SystemProfile):
        return profiles.flat
    return SystemProfile.from_profiles(profiles).flat


def unpack(xi, n: int, r: int, t0: float) -> SystemProfile:
    """Inverse of :func:`pack`."""
    return SystemProfile.from_flat(xi, n, r, t0)
