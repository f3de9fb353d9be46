"""Junction-loaded transmission line with resonant phase matching.

Each unit cell is a series Josephson junction followed by a shunt capacitor
to ground.  Every ``period_cells``-th cell also carries a phase-matching
branch: a coupling capacitor in series with a parallel LC resonator.  The
regular shunt capacitor of that cell is reduced by the coupling capacitance
so the line keeps its characteristic impedance well below the resonance.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .rfnet import PHI0, Element, Netlist, NetlistError, Port, bloch_phase_per_cell, connect


def junction_linear_inductance(ic: float) -> float:
    """Small-signal junction inductance Phi0 / (2 pi Ic)."""
    if not ic > 0:
        raise ValueError("critical current must be positive")
    return PHI0 / (2 * math.pi * ic)


def cell_shunt_capacitance(lj0: float, z_line: float) -> float:
    """Shunt capacitance giving a lumped line of impedance sqrt(L/C) = z_line."""
    if not (lj0 > 0 and z_line > 0):
        raise ValueError("inductance and impedance must be positive")
    return lj0 / z_line**2


def rpm_resonator_values(f_r: float, z_rpm: float) -> tuple[float, float]:
    """Inductance and capacitance of an LC resonator with resonance f_r and mode impedance z_rpm."""
    if not (f_r > 0 and z_rpm > 0):
        raise ValueError("resonance frequency and impedance must be positive")
    w = 2 * math.pi * f_r
    return z_rpm / w, 1 / (z_rpm * w)


def idler_frequency(f_p: float, f_s: float) -> float:
    """Four-wave-mixing idler 2 f_p - f_s."""
    if not (f_p > 0 and f_s > 0):
        raise ValueError("frequencies must be positive")
    f_i = 2 * f_p - f_s
    if f_i <= 0:
        raise ValueError(f"nonphysical idler frequency {f_i:g} Hz")
    return f_i


@dataclass(frozen=True)
class RpmSpec:
    """Phase-matching resonators.

    ``coupling_fraction`` is the coupling capacitance as a fraction of the
    line's cell capacitance; it must not exceed one because the regular
    shunt capacitor of the loaded cell is reduced by the same amount.
    """

    f_r: float = 8.7e9
    z_rpm: float = 15.0
    period_cells: int = 3
    coupling_fraction: float = 0.75

    def __post_init__(self):
        if not (self.f_r > 0 and self.z_rpm > 0):
            raise ValueError("f_r and z_rpm must be positive")
        if int(self.period_cells) != self.period_cells or self.period_cells < 1:
            raise ValueError("period_cells must be a positive integer")
        if not 0 < self.coupling_fraction <= 1:
            raise ValueError("coupling_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class TwpaDesign:
    n_cells: int = 1200
    ic: float = 5e-6
    z_line: float = 50.0
    rpm: RpmSpec | None = field(default_factory=RpmSpec)
    tan_delta: float | None = None
    # capacitance across each junction (plasma frequency ~40 GHz); None models an ideal junction
    c_junction: float | None = 240e-15

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError("n_cells must be a positive integer")
        if not (self.ic > 0 and self.z_line > 0):
            raise ValueError("ic and z_line must be positive")
        if self.rpm is not None and self.rpm.period_cells > self.n_cells:
            raise ValueError("period_cells cannot exceed n_cells")
        if self.tan_delta is not None and self.tan_delta < 0:
            raise ValueError("tan_delta must be non-negative")
        if self.c_junction is not None and not self.c_junction > 0:
            raise ValueError("c_junction must be positive when given")

    @property
    def lj0(self) -> float:
        return junction_linear_inductance(self.ic)

    @property
    def c_shunt(self) -> float:
        return cell_shunt_capacitance(self.lj0, self.z_line)

    @property
    def plasma_frequency(self) -> float:
        """Junction plasma frequency (Hz); infinite without junction capacitance."""
        if self.c_junction is None:
            return math.inf
        return 1 / (2 * math.pi * math.sqrt(self.lj0 * self.c_junction))

    @property
    def c_coupling(self) -> float:
        return 0.0 if self.rpm is None else self.rpm.coupling_fraction * self.c_shunt

    def resonator(self) -> tuple[float, float]:
        if self.rpm is None:
            raise ValueError("design has no phase-matching resonators")
        return rpm_resonator_values(self.rpm.f_r, self.rpm.z_rpm)

    def is_loaded(self, cell: int) -> bool:
        """Cells are numbered from 1; every period-th cell carries a resonator."""
        return self.rpm is not None and cell % self.rpm.period_cells == 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "TwpaDesign":
        doc = dict(doc)
        rpm = doc.pop("rpm", {})
        known = {"n_cells", "ic", "z_line", "tan_delta", "c_junction"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown TwpaDesign fields: {sorted(extra)}")
        return cls(rpm=None if rpm is None else RpmSpec(**rpm), **doc)

    @classmethod
    def load(cls, path) -> "TwpaDesign":
        return cls.from_dict(json.loads(Path(path).read_text()))


class NonlinearNetlist(Netlist):
    """Netlist that may hold Josephson branches (I = Ic sin phi, V = Phi0/2pi dphi/dt)."""

    @classmethod
    def of(cls, net: Netlist) -> "NonlinearNetlist":
        return cls(net.elements, net.ports, net.nodes)


def build_twpa_netlist(design: TwpaDesign) -> NonlinearNetlist:
    """Two-port junction line; port 1 at node ``t0``, port 2 at ``t{n_cells}``."""
    elems: list[Element] = []
    c0 = design.c_shunt
    if design.rpm is not None:
        lr, cr = design.resonator()
        cc = design.c_coupling
    for k in range(1, design.n_cells + 1):
        a, b = f"t{k - 1}", f"t{k}"
        elems.append(Element("josephson", design.ic, a, b, f"J{k}"))
        if design.c_junction is not None:
            elems.append(Element("capacitor", design.c_junction, a, b, f"CJ{k}"))
        if design.is_loaded(k):
            # the regular capacitor vanishes when coupling_fraction == 1
            if c0 - cc > 1e-6 * c0:
                elems.append(Element("capacitor", c0 - cc, b, "0", f"C{k}"))
            r = f"r{k}"
            elems.append(Element("capacitor", cc, b, r, f"Cc{k}"))
            elems.append(Element("inductor", lr, r, "0", f"Lr{k}"))
            elems.append(Element("capacitor", cr, r, "0", f"Cr{k}"))
        else:
            elems.append(Element("capacitor", c0, b, "0", f"C{k}"))
    ports = (Port("t0", design.z_line), Port(f"t{design.n_cells}", design.z_line))
    return NonlinearNetlist(tuple(elems), ports)


def cell_abcd(design: TwpaDesign, f) -> np.ndarray:
    """Linearised ABCD of one resonator period (``period_cells`` junction cells)."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    w = 2 * np.pi * f
    period = 1 if design.rpm is None else design.rpm.period_cells
    out = np.broadcast_to(np.eye(2, dtype=complex), (f.size, 2, 2)).copy()
    for k in range(1, period + 1):
        ser = np.zeros((f.size, 2, 2), dtype=complex)
        ser[:, 0, 0] = ser[:, 1, 1] = 1
        if design.c_junction is None:
            ser[:, 0, 1] = 1j * w * design.lj0
        else:
            ser[:, 0, 1] = 1 / (1 / (1j * w * design.lj0) + 1j * w * design.c_junction)
        y = 1j * w * design.c_shunt
        if design.rpm is not None and k == period:
            lr, cr = design.resonator()
            cc = design.c_coupling
            # series (Cc, tank) as product over sum; finite where the tank is open at f_r
            y_cc = 1j * w * cc
            y_tank = 1 / (1j * w * lr) + 1j * w * cr
            y = 1j * w * (design.c_shunt - cc) + y_cc * y_tank / (y_cc + y_tank)
        sh = np.zeros((f.size, 2, 2), dtype=complex)
        sh[:, 0, 0] = sh[:, 1, 1] = 1
        sh[:, 1, 0] = y
        out = out @ ser @ sh
    return out


def dispersion(design: TwpaDesign, f) -> np.ndarray:
    """Complex Bloch phase per junction cell (radians/cell)."""
    period = 1 if design.rpm is None else design.rpm.period_cells
    return np.atleast_1d(bloch_phase_per_cell(cell_abcd(design, f))) / period


def stopband_edges(design: TwpaDesign, f_lo: float = 1e9, f_hi: float = 20e9, n: int = 40001):
    """Frequency intervals where the linearised Bloch phase is complex."""
    f = np.linspace(f_lo, f_hi, n)
    k = dispersion(design, f)
    stop = np.abs(k.imag) > 1e-9
    bands = []
    i = 0
    while i < f.size:
        if stop[i]:
            j = i
            while j + 1 < f.size and stop[j + 1]:
                j += 1
            bands.append((float(f[i]), float(f[j])))
            i = j + 1
        else:
            i += 1
    return bands


def phase_mismatch(design: TwpaDesign, f_p: float, f_s) -> np.ndarray:
    """Linear 4WM phase mismatch 2 k_p - k_s - k_i per cell."""
    f_s = np.atleast_1d(np.asarray(f_s, dtype=float))
    k_p = dispersion(design, f_p).real[0]
    return 2 * k_p - dispersion(design, f_s).real - dispersion(design, 2 * f_p - f_s).real


def assemble_device(twpa: Netlist, diplexer_in: Netlist, diplexer_out: Netlist) -> NonlinearNetlist:
    """Four-port device: 1 low in, 2 low out, 3 high in, 4 high out.

    Diplexer port 1 (common) of each diplexer is tied to one end of the line.
    """
    if twpa.n_ports != 2:
        raise NetlistError(f"the line must be a two-port, got {twpa.n_ports} ports")
    for d in (diplexer_in, diplexer_out):
        if d.n_ports != 3:
            raise NetlistError(f"diplexers must be three-ports, got {d.n_ports} ports")
    for d, p in ((diplexer_in, twpa.ports[0]), (diplexer_out, twpa.ports[1])):
        if not math.isclose(d.ports[0].z0, p.z0):
            raise NetlistError("diplexer common-port impedance differs from the line impedance")
    t_in, t_out = twpa.ports[0].node, twpa.ports[1].node
    net = connect(
        [("L:", twpa), ("A:", diplexer_in), ("B:", diplexer_out)],
        ties=[
            (f"A:{diplexer_in.ports[0].node}", f"L:{t_in}"),
            (f"B:{diplexer_out.ports[0].node}", f"L:{t_out}"),
        ],
        ports=[
            f"A:{diplexer_in.ports[1].node}",
            f"B:{diplexer_out.ports[1].node}",
            f"A:{diplexer_in.ports[2].node}",
            f"B:{diplexer_out.ports[2].node}",
        ],
    )
    return NonlinearNetlist.of(net)


def thru_line(z0: float = 50.0) -> Netlist:
    """Electrically negligible two-port standing in for the line (1 fH series)."""
    return Netlist((Element("inductor", 1e-18, "a", "b"),), (Port("a", z0), Port("b", z0)))
