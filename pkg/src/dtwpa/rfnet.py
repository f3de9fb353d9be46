"""Linear frequency-domain network engine.

Netlists are plain node/element graphs with a distinguished ground node
``"0"``.  Scattering parameters are computed by nodal admittance analysis
with every port terminated in its reference impedance; two-port ladders can
alternatively be evaluated by ABCD cascade, which is used as a cross-check.

Port numbers in the public API are 1-based, so ``sweep.sij(2, 1)`` is S21.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lu_factor, lu_solve

GROUND = "0"
_GROUND_ALIASES = {"0", "gnd", "GND", "ground"}

#: Magnetic flux quantum h/2e in Wb.
PHI0 = 2.067833848e-15

ELEMENT_KINDS = ("resistor", "inductor", "capacitor", "josephson")


class NetlistError(ValueError):
    """Raised for malformed or inconsistent netlists."""


class SingularNetworkError(RuntimeError):
    """The nodal admittance matrix is singular at some frequency."""

    def __init__(self, frequency):
        self.frequency = float(frequency)
        super().__init__(f"singular admittance matrix at f = {self.frequency:.6g} Hz")


class NoCrossoverError(ValueError):
    """No equal-magnitude crossing exists in the sweep."""


def _canon(node) -> str:
    node = str(node)
    return GROUND if node in _GROUND_ALIASES else node


@dataclass(frozen=True)
class Element:
    kind: str
    value: float
    n1: str
    n2: str
    name: str = ""

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise NetlistError(f"unknown element kind {self.kind!r}")
        v = float(self.value)
        if not (math.isfinite(v) and v > 0):
            raise NetlistError(f"element {self.name or self.kind} has non-positive value {self.value!r}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "n1", _canon(self.n1))
        object.__setattr__(self, "n2", _canon(self.n2))
        if self.n1 == self.n2:
            raise NetlistError(f"element {self.name or self.kind} is shorted on node {self.n1!r}")


@dataclass(frozen=True)
class Port:
    node: str
    z0: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "node", _canon(self.node))
        if self.node == GROUND:
            raise NetlistError("a port cannot sit on the ground node")
        if not float(self.z0) > 0:
            raise NetlistError(f"port impedance must be positive, got {self.z0!r}")
        object.__setattr__(self, "z0", float(self.z0))


@dataclass(frozen=True)
class Netlist:
    """Immutable node/element graph with ordered ports.

    Josephson elements carry their critical current (A) as ``value``.  They
    are accepted here so one container serves both the linear diplexer and
    the junction-loaded line; linear analysis requires :meth:`linearized`.
    """

    elements: tuple[Element, ...]
    ports: tuple[Port, ...]
    nodes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "ports", tuple(self.ports))
        seen: dict[str, None] = {}
        for node in self.nodes:
            seen.setdefault(_canon(node), None)
        for e in self.elements:
            seen.setdefault(e.n1, None)
            seen.setdefault(e.n2, None)
        for p in self.ports:
            seen.setdefault(p.node, None)
        seen.pop(GROUND, None)
        object.__setattr__(self, "nodes", tuple(seen))

    # -- queries ---------------------------------------------------------
    @property
    def n_ports(self) -> int:
        return len(self.ports)

    @property
    def is_linear(self) -> bool:
        return not any(e.kind == "josephson" for e in self.elements)

    @property
    def junctions(self) -> tuple[Element, ...]:
        return tuple(e for e in self.elements if e.kind == "josephson")

    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def validate(self) -> "Netlist":
        """Check that ports exist and are attached to the circuit."""
        if not self.ports:
            raise NetlistError("netlist has no ports")
        adj: dict[str, set[str]] = {}
        for e in self.elements:
            adj.setdefault(e.n1, set()).add(e.n2)
            adj.setdefault(e.n2, set()).add(e.n1)
        for p in self.ports:
            if p.node not in adj:
                raise NetlistError(f"port node {p.node!r} is not connected to any element")
            # the termination resistor is itself a path to ground, so only
            # the attachment is checked; floating islands without a port make
            # the admittance matrix singular and are reported at solve time
        return self

    # -- transformations ---------------------------------------------------
    def linearized(self) -> "Netlist":
        """Replace every junction by its small-signal inductance Phi0/(2 pi Ic)."""
        elems = tuple(
            Element("inductor", PHI0 / (2 * math.pi * e.value), e.n1, e.n2, e.name) if e.kind == "josephson" else e
            for e in self.elements
        )
        return Netlist(elems, self.ports, self.nodes)

    def frequency_scaled(self, s: float) -> "Netlist":
        """Divide every reactance-setting value by ``s`` (moves the response to s*f)."""
        elems = tuple(
            replace(e, value=e.value / s) if e.kind in ("inductor", "capacitor") else e for e in self.elements
        )
        return Netlist(elems, self.ports, self.nodes)

    def renamed(self, prefix: str, keep: Iterable[str] = ()) -> "Netlist":
        keep = {_canon(k) for k in keep} | {GROUND}

        def ren(n):
            return n if n in keep else f"{prefix}{n}"

        elems = tuple(replace(e, n1=ren(e.n1), n2=ren(e.n2)) for e in self.elements)
        ports = tuple(Port(ren(p.node), p.z0) for p in self.ports)
        return Netlist(elems, ports, tuple(ren(n) for n in self.nodes))

    # -- documents -----------------------------------------------------------
    def to_dict(self) -> dict:
        elems = []
        for e in self.elements:
            d = {"kind": e.kind, "n1": e.n1, "n2": e.n2}
            if e.kind == "josephson":
                d["ic_amp"] = e.value
            else:
                d["value"] = e.value
            if e.name:
                d["name"] = e.name
            elems.append(d)
        return {
            "nodes": list(self.nodes),
            "elements": elems,
            "ports": [{"node": p.node, "z0": p.z0} for p in self.ports],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Netlist":
        try:
            elems = []
            for d in doc["elements"]:
                value = d["ic_amp"] if d["kind"] == "josephson" else d["value"]
                elems.append(Element(d["kind"], value, d["n1"], d["n2"], d.get("name", "")))
            ports = [Port(p["node"], p.get("z0", 50.0)) for p in doc["ports"]]
        except (KeyError, TypeError) as exc:
            raise NetlistError(f"malformed netlist document: {exc!r}") from exc
        return cls(tuple(elems), tuple(ports), tuple(doc.get("nodes", ())))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "Netlist":
        return cls.from_dict(json.loads(Path(path).read_text()))


def connect(parts: Sequence[tuple[str, Netlist]], ties: Sequence[tuple[str, str]], ports: Sequence[str]) -> Netlist:
    """Merge prefixed sub-netlists, short the listed node pairs, pick new ports.

    ``parts`` are ``(prefix, netlist)``; node names become ``prefix + name``.
    ``ties`` are pairs of already-prefixed node names to merge.  ``ports``
    lists the prefixed node names that become the ports of the result, in
    order; their reference impedance is taken from the sub-netlist port.
    """
    elems: list[Element] = []
    z0_of: dict[str, float] = {}
    nodes: list[str] = []
    for prefix, net in parts:
        r = net.renamed(prefix)
        elems.extend(r.elements)
        nodes.extend(r.nodes)
        for p in r.ports:
            z0_of[p.node] = p.z0
    alias: dict[str, str] = {}

    def root(n):
        while n in alias:
            n = alias[n]
        return n

    for a, b in ties:
        ra, rb = root(_canon(a)), root(_canon(b))
        if ra != rb:
            if rb == GROUND:
                ra, rb = rb, ra
            alias[rb] = ra
    elems = [replace(e, n1=root(e.n1), n2=root(e.n2)) for e in elems]
    for n in ports:
        if n not in z0_of:
            raise NetlistError(f"{n!r} is not a port of any sub-netlist")
    new_ports = tuple(Port(root(n), z0_of[n]) for n in ports)
    return Netlist(tuple(elems), new_ports, tuple(dict.fromkeys(root(n) for n in nodes)))


# ---------------------------------------------------------------------------
# S-parameter sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SParamSweep:
    """Complex scattering matrices over a strictly increasing frequency grid."""

    frequencies: np.ndarray
    s: np.ndarray  # shape (F, P, P)
    z0: tuple[float, ...] = ()

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if s.ndim != 3 or s.shape[0] != f.size or s.shape[1] != s.shape[2]:
            raise ValueError("S array must have shape (n_freq, n_port, n_port)")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s", s)
        if not self.z0:
            object.__setattr__(self, "z0", (50.0,) * s.shape[1])

    @property
    def n_ports(self) -> int:
        return self.s.shape[1]

    def sij(self, i: int, j: int) -> np.ndarray:
        """Trace of S_ij with 1-based port numbers."""
        return self.s[:, i - 1, j - 1]

    def db(self, i: int, j: int) -> np.ndarray:
        return 20 * np.log10(np.maximum(np.abs(self.sij(i, j)), 1e-300))

    def to_csv(self, path) -> None:
        p = self.n_ports
        header = ["f_hz"]
        for i in range(1, p + 1):
            for j in range(1, p + 1):
                header += [f"re_s{i}{j}", f"im_s{i}{j}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k, f in enumerate(self.frequencies):
                row = [repr(float(f))]
                for i in range(p):
                    for j in range(p):
                        v = self.s[k, i, j]
                        row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row)

    def to_touchstone(self, path) -> None:
        """Write RI-format Touchstone v1 text (single reference impedance)."""
        z0 = self.z0[0]
        p = self.n_ports
        lines = [f"! {p}-port S-parameters", f"# HZ S RI R {z0:g}"]
        for k, f in enumerate(self.frequencies):
            # two-port files are stored column-major (S11 S21 S12 S22)
            m = self.s[k].T if p == 2 else self.s[k]
            vals = [f"{x:.17g}" for v in m.ravel() for x in (v.real, v.imag)]
            chunk = 8  # four complex entries per line
            first = True
            for start in range(0, len(vals), chunk):
                head = f"{f:.17g} " if first else "  "
                lines.append(head + " ".join(vals[start : start + chunk]))
                first = False
        Path(path).write_text("\n".join(lines) + "\n")


def read_touchstone(path, n_ports: int | None = None) -> SParamSweep:
    """Read RI/MA/DB Touchstone v1 files written by this package or RF tools."""
    path = Path(path)
    if n_ports is None:
        suffix = path.suffix.lower()
        if not (suffix.startswith(".s") and suffix.endswith("p")):
            raise ValueError("cannot infer port count from file name; pass n_ports")
        n_ports = int(suffix[2:-1])
    unit_scale = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
    scale, fmt, z0 = 1e9, "ma", 50.0
    numbers: list[float] = []
    for raw in path.read_text().splitlines():
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            toks = line[1:].lower().split()
            for i, t in enumerate(toks):
                if t in unit_scale:
                    scale = unit_scale[t]
                elif t in ("ri", "ma", "db"):
                    fmt = t
                elif t == "r":
                    z0 = float(toks[i + 1])
            continue
        numbers.extend(float(x) for x in line.split())
    per = 1 + 2 * n_ports * n_ports
    data = np.asarray(numbers).reshape(-1, per)
    f = data[:, 0] * scale
    a, b = data[:, 1::2], data[:, 2::2]
    if fmt == "ri":
        vals = a + 1j * b
    elif fmt == "ma":
        vals = a * np.exp(1j * np.deg2rad(b))
    else:
        vals = 10 ** (a / 20) * np.exp(1j * np.deg2rad(b))
    s = vals.reshape(-1, n_ports, n_ports)
    if n_ports == 2:
        s = np.transpose(s, (0, 2, 1))
    return SParamSweep(f, s, (z0,) * n_ports)


def _element_admittance(e: Element, omega: np.ndarray, tan_delta: float) -> np.ndarray:
    if e.kind == "resistor":
        return np.full(omega.shape, 1.0 / e.value, dtype=complex)
    if e.kind == "capacitor":
        return omega * e.value * (1j + tan_delta)
    if e.kind == "inductor":
        return 1.0 / (1j * omega * e.value)
    raise NetlistError("josephson elements need netlist.linearized() before linear analysis")


def nodal_admittance(netlist: Netlist, freqs, tan_delta: float = 0.0) -> list[sp.csc_matrix]:
    """Nodal admittance matrices (ports terminated) at each frequency."""
    idx = netlist.node_index()
    n = len(idx)
    omega = 2 * np.pi * np.asarray(freqs, dtype=float)
    rows, cols, vals = [], [], []
    for e in netlist.elements:
        y = _element_admittance(e, omega, tan_delta)
        a, b = idx.get(e.n1), idx.get(e.n2)
        for r, c, sgn in ((a, a, 1), (b, b, 1), (a, b, -1), (b, a, -1)):
            if r is not None and c is not None:
                rows.append(r)
                cols.append(c)
                vals.append(sgn * y)
    for p in netlist.ports:
        k = idx[p.node]
        rows.append(k)
        cols.append(k)
        vals.append(np.full(omega.shape, 1.0 / p.z0, dtype=complex))
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    vals = np.asarray(vals)  # (n_entries, F)
    return [sp.csc_matrix((vals[:, k], (rows, cols)), shape=(n, n)) for k in range(omega.size)]


def nport_sparams(netlist: Netlist, freqs, tan_delta: float = 0.0) -> SParamSweep:
    """S-parameters of a linear netlist by nodal analysis.

    Each port is driven in turn through its reference impedance, giving
    ``S = 2 R^-1/2 Z_pp R^-1/2 - I`` with ``Z_pp`` the port block of the
    inverse terminated admittance matrix.  ``tan_delta`` adds the dielectric
    conductance ``omega*C*tan_delta`` across every capacitor.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(freqs <= 0):
        raise ValueError("all frequencies must be positive")
    netlist.validate()
    if not netlist.is_linear:
        raise NetlistError("netlist contains josephson elements; call .linearized() first")
    idx = netlist.node_index()
    n = len(idx)
    pidx = np.array([idx[p.node] for p in netlist.ports])
    rz = np.sqrt(np.array([p.z0 for p in netlist.ports]))
    n_p = pidx.size
    rhs = np.zeros((n, n_p), dtype=complex)
    rhs[pidx, np.arange(n_p)] = 1.0
    out = np.empty((freqs.size, n_p, n_p), dtype=complex)
    mats = nodal_admittance(netlist, freqs, tan_delta)
    dense = n <= 96
    for k, (f, y) in enumerate(zip(freqs, mats)):
        if dense:
            yd = y.toarray()
            lu, piv = lu_factor(yd, check_finite=False)
            pivots = np.abs(np.diag(lu))
            if pivots.min() <= 1e-12 * np.abs(yd).sum(axis=0).max():
                raise SingularNetworkError(f)
            x = lu_solve((lu, piv), rhs, check_finite=False)
        else:
            try:
                lu = spla.splu(y)
            except RuntimeError as exc:
                raise SingularNetworkError(f) from exc
            if np.abs(lu.U.diagonal()).min() <= 1e-12 * spla.norm(y, 1):
                raise SingularNetworkError(f)
            x = lu.solve(rhs)
        zpp = x[pidx, :]
        out[k] = 2 * zpp / np.outer(rz, rz) - np.eye(n_p)
    return SParamSweep(freqs, out, tuple(p.z0 for p in netlist.ports))


# ---------------------------------------------------------------------------
# ABCD cascade
# ---------------------------------------------------------------------------


def element_impedance(kind: str, value: float, f: float) -> complex:
    w = 2 * math.pi * f
    if kind == "resistor":
        return complex(value)
    if kind == "inductor":
        return 1j * w * value
    if kind == "capacitor":
        return complex(np.inf) if value == 0 else 1 / (1j * w * value)
    raise NetlistError(f"no impedance for kind {kind!r}")


def element_abcd(kind: str, value: float, orientation: str, f: float) -> np.ndarray:
    """ABCD matrix of a single series or shunt element at frequency ``f``."""
    if f <= 0:
        raise ValueError("frequency must be positive")
    if orientation == "series":
        z = element_impedance(kind, value, f)
        return np.array([[1, z], [0, 1]], dtype=complex)
    if orientation == "shunt":
        if kind == "inductor" and value == 0:
            raise ValueError("zero shunt inductance is a short")
        y = 1 / element_impedance(kind, value, f) if kind != "capacitor" else 1j * 2 * math.pi * f * value
        return np.array([[1, 0], [y, 1]], dtype=complex)
    raise ValueError(f"orientation must be 'series' or 'shunt', got {orientation!r}")


def cascade(chain: Sequence[np.ndarray]) -> np.ndarray:
    """Ordered product of ABCD matrices (works on stacked ``(..., 2, 2)`` arrays)."""
    if len(chain) == 0:
        raise ValueError("cannot cascade an empty chain")
    out = np.asarray(chain[0], dtype=complex)
    for m in chain[1:]:
        out = out @ np.asarray(m, dtype=complex)
    return out


def abcd_to_s(abcd: np.ndarray, z0: float = 50.0) -> np.ndarray:
    """Two-port S from ABCD, equal real reference impedances on both sides."""
    a, b, c, d = abcd[..., 0, 0], abcd[..., 0, 1], abcd[..., 1, 0], abcd[..., 1, 1]
    den = a + b / z0 + c * z0 + d
    s = np.empty(abcd.shape, dtype=complex)
    s[..., 0, 0] = (a + b / z0 - c * z0 - d) / den
    s[..., 0, 1] = 2 * (a * d - b * c) / den
    s[..., 1, 0] = 2 / den
    s[..., 1, 1] = (-a + b / z0 - c * z0 + d) / den
    return s


def ladder_abcd(ladder: Iterable[tuple[str, str, float]], f: float) -> np.ndarray:
    """Cascade ``(orientation, kind, value)`` triples into one ABCD matrix."""
    mats = [element_abcd(kind, value, orient, f) for orient, kind, value in ladder]
    return cascade(mats) if mats else np.eye(2, dtype=complex)


# ---------------------------------------------------------------------------
# Derived quantities
# ---------------------------------------------------------------------------


def unitarity_error(sweep: SParamSweep) -> np.ndarray:
    """Frobenius norm of S^H S - I at every frequency."""
    s = sweep.s
    prod = np.conj(np.transpose(s, (0, 2, 1))) @ s
    return np.linalg.norm(prod - np.eye(s.shape[1]), axis=(1, 2))


def reciprocity_error(sweep: SParamSweep) -> np.ndarray:
    return np.linalg.norm(sweep.s - np.transpose(sweep.s, (0, 2, 1)), axis=(1, 2))


def crossover_frequency(sweep: SParamSweep, port_low: int = 2, port_high: int = 3, port_in: int = 1) -> float:
    """Frequency where |S_low,in| = |S_high,in|.

    The first sign change of the dB difference is located on the grid and
    refined by linear interpolation of that difference.
    """
    d = sweep.db(port_low, port_in) - sweep.db(port_high, port_in)
    sign = np.sign(d)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    idx = [i for i in idx if not (sign[i] == 0 and sign[i + 1] == 0)]
    if not idx:
        raise NoCrossoverError("no crossover found in the sweep")
    i = idx[0]
    f0, f1 = sweep.frequencies[i], sweep.frequencies[i + 1]
    if d[i] == d[i + 1]:
        return float(f0)
    return float(f0 + (f1 - f0) * d[i] / (d[i] - d[i + 1]))


def bloch_phase_per_cell(cell_abcd: np.ndarray) -> np.ndarray | complex:
    """Complex Bloch phase ``k`` of a reciprocal periodic cell, cos k = (A+D)/2.

    The principal arccos is used and the sign is chosen so that Im(k) >= 0
    (a decaying forward wave); on the real axis Re(k) >= 0.  Inputs may be
    stacked along leading axes.
    """
    m = np.asarray(cell_abcd, dtype=complex)
    half_trace = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    k = np.arccos(half_trace)
    flip = (k.imag < 0) | ((k.imag == 0) & (k.real < 0))
    k = np.where(flip, -k, k)
    return k if k.ndim else complex(k)
