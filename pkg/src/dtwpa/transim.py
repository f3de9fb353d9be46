"""Time-domain simulation of junction-loaded networks.

The solver integrates the node-flux equations with the trapezoidal rule and
a Newton iteration on the junction nonlinearity (see :mod:`dtwpa._kernel`).
Ports are Thevenin sources behind their reference impedance.  A tone of
available power P (W) on a port of impedance Z0 has EMF amplitude
``sqrt(8 Z0 P)``; wave amplitudes are peak values in sqrt(W), so a wave of
complex amplitude ``b`` carries ``|b|^2 / 2`` watts.  Steady-state tones are
read from the post-settle record with a rectangular-window DFT, which is
leakage-free when every tone completes an integer number of cycles in the
analysis window.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from . import _kernel
from .rfnet import PHI0, Netlist, NetlistError

log = logging.getLogger(__name__)

H_PLANCK = 6.62607015e-34


class NewtonConvergenceError(RuntimeError):
    def __init__(self, step, residual):
        self.step, self.residual = int(step), float(residual)
        super().__init__(f"Newton iteration failed at step {self.step} (last update {self.residual:.3e} Wb)")


class JunctionRunawayError(RuntimeError):
    """A junction phase rotated faster than the configured bound (effective switching)."""

    def __init__(self, step, rate):
        self.step, self.rate = int(step), float(rate)
        super().__init__(f"junction phase rate {self.rate:.3e} rad/s exceeded the bound at step {self.step}")


class CommensurabilityError(ValueError):
    """Tone frequency does not complete an integer number of cycles in the window."""


class JunctionSwitchingWarning(UserWarning):
    """Some junction phase exceeded pi/2, beyond which the lossless model is unreliable."""


def dbm_to_watt(p_dbm):
    return 1e-3 * 10 ** (np.asarray(p_dbm, dtype=float) / 10)


def watt_to_dbm(p_w):
    return 10 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


@dataclass(frozen=True)
class Tone:
    port: int  # 1-based
    frequency: float
    power_dbm: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("tone frequency must be positive")
        if self.port < 1:
            raise ValueError("ports are numbered from 1")


@dataclass(frozen=True)
class DriveConfig:
    tones: tuple[Tone, ...] = ()
    ramp_time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(self.tones))

    @property
    def effective_ramp(self) -> float:
        """Raised-cosine ramp; defaults to 50 periods of the strongest (pump) tone."""
        if self.ramp_time is not None:
            return self.ramp_time
        if not self.tones:
            return 0.0
        strongest = max(self.tones, key=lambda t: (t.power_dbm, -t.frequency))
        return 50.0 / strongest.frequency

    def with_tones(self, *extra: Tone) -> "DriveConfig":
        return DriveConfig(self.tones + tuple(extra), self.ramp_time)

    def max_frequency(self) -> float:
        return max((t.frequency for t in self.tones), default=0.0)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-12
    t_end: float = 60e-9
    settle_time: float = 20e-9
    newton_tol: float = 1e-10
    max_newton_iters: int = 30
    record_nodes: tuple[str, ...] = ()
    record_junctions: tuple[int, ...] = ()
    # a phase slip turns a junction at roughly its plasma frequency; pumped
    # junctions stay well below 2 pi x 25 GHz
    max_phase_rate: float = 2 * math.pi * 25e9

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > self.settle_time >= 0):
            raise ValueError("need dt > 0 and t_end > settle_time >= 0")
        object.__setattr__(self, "record_nodes", tuple(self.record_nodes))
        object.__setattr__(self, "record_junctions", tuple(self.record_junctions))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def settle_steps(self) -> int:
        return int(round(self.settle_time / self.dt))

    @property
    def window(self) -> float:
        return (self.n_steps - self.settle_steps) * self.dt

    @property
    def resolution(self) -> float:
        """Frequency spacing of the analysis DFT."""
        return 1.0 / self.window

    def snap(self, f):
        """Round frequencies to the nearest commensurate grid point."""
        df = self.resolution
        return np.round(np.asarray(f, dtype=float) / df) * df

    @classmethod
    def commensurate(
        cls,
        resolution: float = 25e6,
        dt: float = 1e-12,
        settle_time: float = 30e-9,
        **kw,
    ) -> "SimConfig":
        """Config whose analysis window is exactly 1/resolution and a whole number of steps."""
        n_win = int(round(1.0 / (resolution * dt)))
        n_settle = int(math.ceil(settle_time / dt))
        return cls(dt=dt, t_end=(n_settle + n_win) * dt, settle_time=n_settle * dt, **kw)


@dataclass
class TransientResult:
    time: np.ndarray
    voltages: np.ndarray  # (n_samples, n_recorded_nodes)
    nodes: tuple[str, ...]
    junction_phases: np.ndarray  # (n_samples, n_recorded_junctions)
    max_abs_phase: np.ndarray  # per junction, whole run
    port_nodes: tuple[str, ...]
    port_z0: tuple[float, ...]
    drives: DriveConfig
    config: SimConfig
    newton_iterations: int = 0
    warnings: list[str] = field(default_factory=list)

    def _col(self, node: str) -> int:
        return self.nodes.index(node)

    def node_voltage(self, node: str) -> np.ndarray:
        return self.voltages[:, self._col(node)]

    def port_voltage(self, port: int) -> np.ndarray:
        return self.node_voltage(self.port_nodes[port - 1])

    def source_emf(self, port: int, t=None) -> np.ndarray:
        t = self.time if t is None else np.asarray(t)
        z0 = self.port_z0[port - 1]
        ramp = self.drives.effective_ramp
        r = np.where(t < ramp, 0.5 - 0.5 * np.cos(np.pi * t / ramp), 1.0) if ramp > 0 else np.ones_like(t)
        out = np.zeros_like(t, dtype=float)
        for tone in self.drives.tones:
            if tone.port == port:
                amp = math.sqrt(8 * z0 * float(dbm_to_watt(tone.power_dbm)))
                out += amp * np.cos(2 * np.pi * tone.frequency * t + tone.phase)
        return r * out

    def port_current(self, port: int) -> np.ndarray:
        """Current delivered by the port source into the network."""
        return (self.source_emf(port) - self.port_voltage(port)) / self.port_z0[port - 1]

    def outgoing_wave(self, port: int) -> np.ndarray:
        z0 = self.port_z0[port - 1]
        return (self.port_voltage(port) - 0.5 * self.source_emf(port)) / math.sqrt(z0)

    @property
    def analysis_samples(self) -> int:
        return self.time.size - 1


def incident_amplitude(drives: DriveConfig, port: int, f: float) -> complex:
    """Complex peak incident wave (sqrt W) of the tone at ``f`` on ``port``."""
    amp = 0j
    for t in drives.tones:
        if t.port == port and math.isclose(t.frequency, f, rel_tol=1e-12):
            amp += math.sqrt(2 * float(dbm_to_watt(t.power_dbm))) * np.exp(1j * t.phase)
    return amp


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


@dataclass
class _System:
    order: np.ndarray
    node_pos: dict
    bw: int
    a0: np.ndarray
    b0: np.ndarray
    m4: np.ndarray
    ja: np.ndarray
    jb: np.ndarray
    ic: np.ndarray


def _stamp(mat, a, b, val):
    if a is not None:
        mat[a, a] += val
    if b is not None:
        mat[b, b] += val
    if a is not None and b is not None:
        mat[a, b] -= val
        mat[b, a] -= val


def _to_band(mat: sp.spmatrix, bw: int) -> np.ndarray:
    coo = mat.tocoo()
    band = np.zeros((mat.shape[0], 2 * bw + 1))
    np.add.at(band, (coo.row, coo.col - coo.row + bw), coo.data)
    return band


def _assemble(netlist: Netlist, dt: float) -> _System:
    nodes = netlist.nodes
    n = len(nodes)
    raw = {name: i for i, name in enumerate(nodes)}
    # pattern for bandwidth reduction
    rows, cols = [], []
    for e in netlist.elements:
        a, b = raw.get(e.n1), raw.get(e.n2)
        if a is not None and b is not None:
            rows += [a, b]
            cols += [b, a]
    pattern = sp.csr_matrix((np.ones(len(rows) + n), (rows + list(range(n)), cols + list(range(n)))), shape=(n, n))
    order = reverse_cuthill_mckee(pattern, symmetric_mode=True)
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    node_pos = {name: int(pos[i]) for name, i in raw.items()}

    m = sp.lil_matrix((n, n))
    g = sp.lil_matrix((n, n))
    k = sp.lil_matrix((n, n))
    ja, jb, ic = [], [], []
    for e in netlist.elements:
        a, b = node_pos.get(e.n1), node_pos.get(e.n2)
        if e.kind == "capacitor":
            _stamp(m, a, b, e.value)
        elif e.kind == "resistor":
            _stamp(g, a, b, 1.0 / e.value)
        elif e.kind == "inductor":
            _stamp(k, a, b, 1.0 / e.value)
        else:
            ja.append(-1 if a is None else a)
            jb.append(-1 if b is None else b)
            ic.append(e.value)
    for p in netlist.ports:
        i = node_pos[p.node]
        g[i, i] += 1.0 / p.z0
    m, g, k = m.tocsr(), g.tocsr(), k.tocsr()
    full = (abs(m) + abs(g) + abs(k)).tocoo()
    bw = int(np.max(np.abs(full.row - full.col))) if full.nnz else 0
    for a, b in zip(ja, jb):
        if a >= 0 and b >= 0:
            bw = max(bw, abs(a - b))
    a0 = _to_band(4 * m / dt**2 + 2 * g / dt + k, bw)
    b0 = _to_band(4 * m / dt**2 + 2 * g / dt - k, bw)
    m4 = _to_band(4 * m / dt, bw)
    return _System(
        order,
        node_pos,
        bw,
        a0,
        b0,
        m4,
        np.asarray(ja, dtype=np.int64),
        np.asarray(jb, dtype=np.int64),
        np.asarray(ic, dtype=float),
    )


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def check_resolution(drives: DriveConfig, cfg: SimConfig) -> None:
    f_max = drives.max_frequency()
    if f_max > 0 and cfg.dt > 1 / (40 * f_max) * (1 + 1e-9):
        raise ValueError(f"dt = {cfg.dt:g} s gives fewer than 40 points per period at {f_max:g} Hz")
    ramp = drives.effective_ramp
    if cfg.settle_time < 5 * ramp * (1 - 1e-9):
        raise ValueError(f"settle_time {cfg.settle_time:g} s is shorter than 5 ramp times ({5 * ramp:g} s)")


def simulate_transient(netlist: Netlist, drives: DriveConfig, cfg: SimConfig) -> TransientResult:
    """Trapezoidal transient run from rest; records port nodes plus ``cfg.record_nodes``."""
    netlist.validate()
    check_resolution(drives, cfg)
    for t in drives.tones:
        if t.port > netlist.n_ports:
            raise NetlistError(f"tone on port {t.port} but the netlist has {netlist.n_ports} ports")
    sysm = _assemble(netlist, cfg.dt)
    port_nodes = tuple(p.node for p in netlist.ports)
    rec_names = tuple(dict.fromkeys(port_nodes + tuple(cfg.record_nodes)))
    for name in rec_names:
        if name not in sysm.node_pos:
            raise NetlistError(f"cannot record unknown node {name!r}")
    rec_idx = np.array([sysm.node_pos[nm] for nm in rec_names], dtype=np.int64)
    rec_j = np.asarray(cfg.record_junctions, dtype=np.int64)
    if rec_j.size and (rec_j.min() < 0 or rec_j.max() >= sysm.ja.size):
        raise ValueError("record_junctions index out of range")

    src_node, src_amp, src_w, src_ph = [], [], [], []
    for t in drives.tones:
        p = netlist.ports[t.port - 1]
        emf = math.sqrt(8 * p.z0 * float(dbm_to_watt(t.power_dbm)))
        src_node.append(sysm.node_pos[p.node])
        src_amp.append(emf / p.z0)
        src_w.append(2 * math.pi * t.frequency)
        src_ph.append(t.phase)

    inv_phi0 = 2 * math.pi / PHI0
    rec_start = max(cfg.settle_steps, 1)
    status, step, resid, rec_v, rec_pj, max_phase, iters = _kernel.run(
        sysm.a0,
        sysm.b0,
        sysm.m4,
        sysm.bw,
        sysm.ja,
        sysm.jb,
        sysm.ic,
        inv_phi0,
        np.asarray(src_node, dtype=np.int64),
        np.asarray(src_amp, dtype=float),
        np.asarray(src_w, dtype=float),
        np.asarray(src_ph, dtype=float),
        float(drives.effective_ramp),
        float(cfg.dt),
        cfg.n_steps,
        rec_idx,
        rec_start,
        rec_j,
        float(cfg.newton_tol),
        int(cfg.max_newton_iters),
        float(cfg.max_phase_rate),
    )
    if status == _kernel.STATUS_NEWTON:
        raise NewtonConvergenceError(step, resid)
    if status == _kernel.STATUS_RUNAWAY:
        raise JunctionRunawayError(step, resid)
    if status == _kernel.STATUS_PIVOT:
        raise NewtonConvergenceError(step, float("nan"))
    msgs = []
    if max_phase.size and max_phase.max() > math.pi / 2:
        n_hot = int(np.sum(max_phase > math.pi / 2))
        msg = f"{n_hot} junction(s) exceeded |phi| = pi/2 (max {max_phase.max():.3f} rad)"
        warnings.warn(msg, JunctionSwitchingWarning, stacklevel=2)
        msgs.append(msg)
    time = (rec_start + np.arange(rec_v.shape[0])) * cfg.dt
    return TransientResult(
        time=time,
        voltages=rec_v,
        nodes=rec_names,
        junction_phases=rec_pj,
        max_abs_phase=max_phase,
        port_nodes=port_nodes,
        port_z0=tuple(p.z0 for p in netlist.ports),
        drives=drives,
        config=cfg,
        newton_iterations=int(iters),
        warnings=msgs,
    )


# ---------------------------------------------------------------------------
# Spectral extraction
# ---------------------------------------------------------------------------


def tone_amplitude(x: np.ndarray, t: np.ndarray, f: float, window: str = "rect") -> complex:
    """Complex peak amplitude of the component of ``x`` at ``f`` (cos reference)."""
    n = x.size
    ph = np.exp(-2j * np.pi * f * t)
    if window == "rect":
        return complex(2.0 / n * np.dot(x, ph))
    if window == "hann":
        w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
        return complex(2.0 / w.sum() * np.dot(w * x, ph))
    raise ValueError(f"unknown window {window!r}")


def _check_commensurate(result: TransientResult, f: float) -> None:
    cycles = f * result.analysis_samples * result.config.dt
    if abs(cycles - round(cycles)) > 1e-6:
        raise CommensurabilityError(
            f"{f:g} Hz completes {cycles:.6f} cycles in the analysis window; snap it with SimConfig.snap"
        )


def extract_tone(result: TransientResult, port: int, f: float, window: str | None = None) -> complex:
    """Outgoing-wave amplitude (peak, sqrt W) at ``port`` and frequency ``f``.

    Rectangular windowing over the commensurate post-settle record is the
    default; a non-commensurate ``f`` requires an explicit ``window``.
    """
    if window is None:
        _check_commensurate(result, f)
        window = "rect"
    n = result.analysis_samples
    b = result.outgoing_wave(port)[:n]
    return tone_amplitude(b, result.time[:n], f, window)


def transmission(result: TransientResult, out_port: int, in_port: int, f: float) -> complex:
    """Ratio of outgoing wave at ``out_port`` to the incident tone on ``in_port``."""
    a = incident_amplitude(result.drives, in_port, f)
    if a == 0:
        raise ValueError(f"no drive at {f:g} Hz on port {in_port}")
    return extract_tone(result, out_port, f) / a


# ---------------------------------------------------------------------------
# Gain, photon flux and compression
# ---------------------------------------------------------------------------


def photon_flux_check(signal_gain: float, idler_conversion: float) -> float:
    """Manley-Rowe residual |G_i - (G_s - 1)| / G_s for photon-flux gains."""
    if not signal_gain > 0:
        raise ValueError("signal gain must be positive")
    return abs(idler_conversion - (signal_gain - 1.0)) / signal_gain


@dataclass
class GainPoint:
    f_signal: float
    f_idler: float | None
    s21: complex
    idler_wave: complex
    signal_flux_gain: float
    idler_flux_gain: float
    max_abs_phase: float

    @property
    def gain_db(self) -> float:
        return float(20 * np.log10(abs(self.s21)))

    @property
    def manley_rowe_residual(self) -> float:
        return photon_flux_check(self.signal_flux_gain, self.idler_flux_gain)


@dataclass
class GainProfile:
    frequencies: np.ndarray
    gain_db: np.ndarray
    s43_db: np.ndarray | None
    points: list[GainPoint]
    pump: DriveConfig

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["f_hz", "gain_db", "s43_db"])
            for i, f in enumerate(self.frequencies):
                s43 = "" if self.s43_db is None else repr(float(self.s43_db[i]))
                w.writerow([repr(float(f)), repr(float(self.gain_db[i])), s43])


def _idler_port(n_ports: int, out_port: int) -> int:
    # the idler leaves through the other band's output
    if n_ports >= 4:
        return {2: 4, 4: 2}.get(out_port, out_port)
    return out_port


def measure_gain_point(
    device: Netlist,
    pump: DriveConfig,
    f_s: float,
    signal_power: float,
    cfg: SimConfig,
    in_port: int = 1,
    out_port: int = 2,
    phase: float = 0.0,
) -> GainPoint:
    """One pumped run with a single probe tone; returns transmission and flux bookkeeping.

    Photon-flux gains count the probe and its idler over every port, so the
    Manley-Rowe relation holds for the whole device rather than one path.
    """
    f_s = float(cfg.snap(f_s))
    drives = pump.with_tones(Tone(in_port, f_s, signal_power, phase))
    res = simulate_transient(device, drives, cfg)
    a = incident_amplitude(drives, in_port, f_s)
    s = extract_tone(res, out_port, f_s) / a
    ports = range(1, device.n_ports + 1)
    sig_flux = sum(abs(extract_tone(res, p, f_s)) ** 2 for p in ports) / abs(a) ** 2
    f_i, idler, idler_flux = None, 0j, 0.0
    pump_freqs = {t.frequency for t in pump.tones}
    if len(pump_freqs) == 1:
        f_i = float(cfg.snap(2 * next(iter(pump_freqs)) - f_s))
        if f_i > 0 and not math.isclose(f_i, f_s):
            idler = extract_tone(res, _idler_port(device.n_ports, out_port), f_i)
            # photon flux ratio: power ratio times f_s / f_i
            idler_flux = sum(abs(extract_tone(res, p, f_i)) ** 2 for p in ports) / abs(a) ** 2 * f_s / f_i
        else:
            f_i = None
    peak = float(res.max_abs_phase.max()) if res.max_abs_phase.size else 0.0
    return GainPoint(f_s, f_i, s, idler, sig_flux, idler_flux, peak)


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    # the compiled kernel releases the GIL, so threads run concurrently
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def pumped_gain_profile(
    device: Netlist,
    pump: DriveConfig,
    signal_freqs: Sequence[float],
    signal_power: float = -110.0,
    cfg: SimConfig | None = None,
    in_port: int = 1,
    out_port: int = 2,
    s43: bool = False,
    workers: int = 1,
) -> GainProfile:
    """Thru-referenced transmission with the pump applied, one probe tone per run.

    The reference is an ideal thru, so the gain is |b_out / a_in|^2.  With
    ``s43`` the high-band path (port 3 to port 4) is probed at the same
    frequencies in separate runs.  Independent runs are spread over
    ``workers`` threads.
    """
    cfg = cfg or SimConfig.commensurate()
    freqs = np.asarray([float(cfg.snap(f)) for f in signal_freqs])
    points = _map(lambda f: measure_gain_point(device, pump, f, signal_power, cfg, in_port, out_port), list(freqs), workers)
    gain = np.array([p.gain_db for p in points])
    s43_db = None
    if s43:
        s43_db = np.array(
            [g.gain_db for g in _map(lambda f: measure_gain_point(device, pump, f, signal_power, cfg, 3, 4), list(freqs), workers)]
        )
    return GainProfile(freqs, gain, s43_db, points, pump)


@dataclass
class CompressionResult:
    powers_dbm: np.ndarray
    gain_db: np.ndarray
    small_signal_gain_db: float
    p1db_dbm: float | None
    bracketed: bool

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p_in_dbm", "gain_db"])
            for p, g in zip(self.powers_dbm, self.gain_db):
                w.writerow([repr(float(p)), repr(float(g))])


def p1db_from_curve(powers_dbm, gain_db, small_signal_gain_db: float | None = None) -> CompressionResult:
    """Input 1 dB compression point by linear interpolation of gain (dB) vs power (dBm).

    The small-signal gain defaults to the gain at the lowest power.  If the
    curve never drops 1 dB below it, ``p1db_dbm`` is None.  If the very first
    point is already compressed, the first power is returned with
    ``bracketed=False``.
    """
    p = np.asarray(powers_dbm, dtype=float)
    g = np.asarray(gain_db, dtype=float)
    if p.size < 2 or np.any(np.diff(p) <= 0):
        raise ValueError("powers must be ascending with at least two points")
    gss = float(g[0]) if small_signal_gain_db is None else float(small_signal_gain_db)
    target = gss - 1.0
    below = np.nonzero(g <= target)[0]
    if below.size == 0:
        return CompressionResult(p, g, gss, None, False)
    i = int(below[0])
    if i == 0:
        return CompressionResult(p, g, gss, float(p[0]), False)
    p1 = p[i - 1] + (p[i] - p[i - 1]) * (g[i - 1] - target) / (g[i - 1] - g[i])
    return CompressionResult(p, g, gss, float(p1), True)


def compression_sweep(
    device: Netlist,
    pump: DriveConfig,
    f_s: float,
    powers: Sequence[float],
    cfg: SimConfig | None = None,
    in_port: int = 1,
    out_port: int = 2,
    workers: int = 1,
) -> CompressionResult:
    """Gain vs probe power at one frequency; P1dB from :func:`p1db_from_curve`."""
    cfg = cfg or SimConfig.commensurate()
    powers = np.asarray(powers, dtype=float)
    if np.any(np.diff(powers) <= 0):
        raise ValueError("powers must be ascending")
    pts = _map(lambda pw: measure_gain_point(device, pump, f_s, float(pw), cfg, in_port, out_port), list(powers), workers)
    return p1db_from_curve(powers, [p.gain_db for p in pts])


# ---------------------------------------------------------------------------
# Raw time-series dump
# ---------------------------------------------------------------------------

DUMP_MAGIC = b"DTWPATS1"


def write_timeseries(result: TransientResult, path) -> None:
    """Write the recorded node voltages as a little-endian binary file.

    Layout: 8-byte magic ``DTWPATS1``; uint32 number of columns C; uint64
    number of samples S; float64 dt; float64 start time; then C node names,
    each a uint16 byte length followed by UTF-8 bytes; then S records of C
    float64 voltages (row major).
    """
    import struct

    v = np.ascontiguousarray(result.voltages, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<IQdd", v.shape[1], v.shape[0], result.config.dt, float(result.time[0])))
        for name in result.nodes:
            b = name.encode()
            fh.write(struct.pack("<H", len(b)))
            fh.write(b)
        fh.write(v.tobytes())


def read_timeseries(path):
    """Inverse of :func:`write_timeseries`; returns (time, voltages, node names)."""
    import struct

    with open(path, "rb") as fh:
        if fh.read(8) != DUMP_MAGIC:
            raise ValueError(f"{path} is not a time-series dump")
        ncol, nrow, dt, t0 = struct.unpack("<IQdd", fh.read(28))
        names = []
        for _ in range(ncol):
            (ln,) = struct.unpack("<H", fh.read(2))
            names.append(fh.read(ln).decode())
        data = np.frombuffer(fh.read(8 * ncol * nrow), dtype="<f8").reshape(nrow, ncol)
    return t0 + dt * np.arange(nrow), data.copy(), tuple(names)
