"""Case files: schema, validation, serialization, and the shipped 9-bus system.

Cases are JSON documents (schema version 1) holding buses, branches, shunts,
loads, and machine data in per unit on the system base.  Bus ids are
arbitrary integers in the file; internally everything is re-indexed to
0..n-1 in file order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .models import MachineParams, OMEGA_S_60HZ

CASE_SCHEMA_VERSION = 1

BUS_TYPES = ("slack", "pv", "pq")
MACHINE_MODELS = ("classical", "two_axis")


@dataclass
class BusSpec:
    id: int
    type: str
    v_set: float | None = None

    def validate(self):
        if self.type not in BUS_TYPES:
            raise ValidationError(f"bus {self.id}: unknown type {self.type!r}")
        if self.type in ("slack", "pv") and (self.v_set is None or self.v_set <= 0):
            raise ValidationError(f"bus {self.id}: {self.type} bus needs a positive v_set")


@dataclass
class BranchSpec:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0

    def validate(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"branch {self.from_bus}-{self.to_bus}: self-loop")
        if self.r == 0.0 and self.x == 0.0:
            raise ValidationError(f"branch {self.from_bus}-{self.to_bus}: zero impedance")


@dataclass
class ShuntSpec:
    bus: int
    g: float = 0.0
    b: float = 0.0


@dataclass
class LoadSpec:
    bus: int
    p: float
    q: float


@dataclass
class MachineSpec:
    bus: int
    model: str
    H: float
    D: float
    X_d: float
    X_d_p: float
    P_m: float
    E_fd: float
    R_s: float = 0.0
    X_q: float | None = None
    X_q_p: float | None = None
    T_do_p: float | None = None
    T_qo_p: float | None = None

    def validate(self):
        if self.model not in MACHINE_MODELS:
            raise ValidationError(f"machine at bus {self.bus}: unknown model {self.model!r}")
        if self.model == "two_axis":
            for name in ("X_q", "X_q_p", "T_do_p", "T_qo_p"):
                if getattr(self, name) is None:
                    raise ValidationError(f"machine at bus {self.bus}: two-axis model needs {name}")

    def params(self, omega_s: float) -> MachineParams:
        if self.model == "classical":
            return MachineParams.classical_machine(
                H=self.H, D=self.D, X_d=self.X_d, X_d_p=self.X_d_p,
                R_s=self.R_s, omega_s=omega_s,
            )
        return MachineParams(
            H=self.H, D=self.D, X_d=self.X_d, X_d_p=self.X_d_p,
            X_q=self.X_q, X_q_p=self.X_q_p, T_do_p=self.T_do_p, T_qo_p=self.T_qo_p,
            R_s=self.R_s, omega_s=omega_s, classical=False,
        )


@dataclass
class CaseFile:
    name: str
    base_mva: float
    f_nominal_hz: float
    buses: list
    branches: list
    shunts: list
    loads: list
    machines: list
    description: str = ""

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def omega_s(self) -> float:
        return 2.0 * np.pi * self.f_nominal_hz

    def bus_index(self) -> dict:
        """Map file bus ids to 0-based positions."""
        return {b.id: i for i, b in enumerate(self.buses)}

    def validate(self):
        if self.base_mva <= 0 or self.f_nominal_hz <= 0:
            raise ValidationError("base_mva and f_nominal_hz must be positive")
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate bus ids")
        for b in self.buses:
            b.validate()
        slack = [b for b in self.buses if b.type == "slack"]
        if len(slack) != 1:
            raise ValidationError(f"exactly one slack bus required, found {len(slack)}")
        idx = self.bus_index()
        for br in self.branches:
            br.validate()
            for end in (br.from_bus, br.to_bus):
                if end not in idx:
                    raise ValidationError(f"branch references unknown bus {end}")
        for coll, label in ((self.shunts, "shunt"), (self.loads, "load"), (self.machines, "machine")):
            for item in coll:
                if item.bus not in idx:
                    raise ValidationError(f"{label} references unknown bus {item.bus}")
        for m in self.machines:
            m.validate()
        machine_buses = [m.bus for m in self.machines]
        if len(set(machine_buses)) != len(machine_buses):
            raise ValidationError("at most one machine per bus is supported")
        if not self._connected():
            raise ValidationError("network graph is not connected")
        return self

    def _connected(self) -> bool:
        idx = self.bus_index()
        adj = {i: set() for i in range(self.n)}
        for br in self.branches:
            i, j = idx[br.from_bus], idx[br.to_bus]
            adj[i].add(j)
            adj[j].add(i)
        seen, stack = {0}, [0]
        while stack:
            for neigh in adj[stack.pop()]:
                if neigh not in seen:
                    seen.add(neigh)
                    stack.append(neigh)
        return len(seen) == self.n

    def to_dict(self) -> dict:
        return {
            "schema_version": CASE_SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "base_mva": self.base_mva,
            "f_nominal_hz": self.f_nominal_hz,
            "buses": [_strip(asdict(b)) for b in self.buses],
            "branches": [_strip(asdict(b)) for b in self.branches],
            "shunts": [_strip(asdict(s)) for s in self.shunts],
            "loads": [_strip(asdict(l)) for l in self.loads],
            "machines": [_strip(asdict(m)) for m in self.machines],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CaseFile":
        version = doc.get("schema_version")
        if version != CASE_SCHEMA_VERSION:
            raise ValidationError(f"unsupported case schema_version {version!r}")
        try:
            case = cls(
                name=doc.get("name", "unnamed"),
                description=doc.get("description", ""),
                base_mva=float(doc["base_mva"]),
                f_nominal_hz=float(doc["f_nominal_hz"]),
                buses=[BusSpec(**b) for b in doc["buses"]],
                branches=[BranchSpec(**b) for b in doc["branches"]],
                shunts=[ShuntSpec(**s) for s in doc.get("shunts", [])],
                loads=[LoadSpec(**l) for l in doc.get("loads", [])],
                machines=[MachineSpec(**m) for m in doc.get("machines", [])],
            )
        except KeyError as exc:
            raise ValidationError(f"case document missing field {exc}") from exc
        except TypeError as exc:
            raise ValidationError(f"case document field error: {exc}") from exc
        return case.validate()


def _strip(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def load_case(path) -> CaseFile:
    """Parse and validate a case file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        return CaseFile.from_dict(doc)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def save_case(case: CaseFile, path):
    with open(path, "w") as fh:
        json.dump(case.to_dict(), fh, indent=2)
        fh.write("\n")


def default_case_path():
    """Path of the packaged 9-bus case."""
    return resources.files("pinnsim.data").joinpath("wscc9.json")


def load_default_case() -> CaseFile:
    return load_case(default_case_path())


def build_admittance(case: CaseFile) -> sp.csr_matrix:
    """Bus admittance matrix from branch and shunt data (pi-model lines)."""
    idx = case.bus_index()
    n = case.n
    Y = sp.lil_matrix((n, n), dtype=complex)
    for br in case.branches:
        i, j = idx[br.from_bus], idx[br.to_bus]
        y = 1.0 / complex(br.r, br.x)
        Y[i, i] += y + 0.5j * br.b
        Y[j, j] += y + 0.5j * br.b
        Y[i, j] -= y
        Y[j, i] -= y
    for sh in case.shunts:
        i = idx[sh.bus]
        Y[i, i] += complex(sh.g, sh.b)
    return Y.tocsr()
