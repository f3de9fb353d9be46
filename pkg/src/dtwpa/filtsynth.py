"""Chebyshev ladder synthesis and contiguous-band diplexer assembly.

Prototype values are produced numerically: the Chebyshev-I power transfer
is realised as the real part of a driving-point admittance, which is then
expanded as a continued fraction about infinity into an L/C ladder.  For a
singly-terminated filter the ideal (zero-impedance) source sits at the
diplexer junction and the resistive termination at the external port; the
values are reported in the usual handbook order, ``g[0]`` next to the
resistor.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P

from .rfnet import Element, Netlist, Port

TERMINATIONS = ("singly", "doubly")
KINDS = ("low-pass", "high-pass")


class PrototypeUnavailableError(ValueError):
    """The requested (order, termination) cannot be synthesised."""


class InconsistentDesignError(ValueError):
    """Diplexer arms were designed for different reference impedances."""


@dataclass(frozen=True)
class FilterSpec:
    order: int = 5
    ripple_db: float = 0.1
    crossover_hz: float = 8e9
    z0: float = 50.0
    kind: str = "low-pass"
    termination: str = "singly"

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"order must be a positive integer, got {self.order!r}")
        if not self.ripple_db > 0:
            raise ValueError("ripple_db must be positive")
        if not self.crossover_hz > 0:
            raise ValueError("crossover_hz must be positive")
        if not self.z0 > 0:
            raise ValueError("z0 must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.termination not in TERMINATIONS:
            raise ValueError(f"termination must be one of {TERMINATIONS}")

    def with_kind(self, kind: str) -> "FilterSpec":
        return FilterSpec(self.order, self.ripple_db, self.crossover_hz, self.z0, kind, self.termination)

    @property
    def scale_factor(self) -> float:
        return cutoff_scale_factor(self.order, self.ripple_db)

    @property
    def cutoff_hz(self) -> float:
        """Ripple-band edge of this arm: f_cx/k_n (low-pass) or f_cx*k_n (high-pass)."""
        k = self.scale_factor
        return self.crossover_hz / k if self.kind == "low-pass" else self.crossover_hz * k


@dataclass(frozen=True)
class PrototypeCoefficients:
    g: tuple[float, ...]
    termination: str = "singly"
    load: float = 1.0

    def __post_init__(self):
        g = tuple(float(x) for x in self.g)
        if not g or any(not (math.isfinite(x) and x > 0) for x in g):
            raise ValueError("prototype values must be positive and finite")
        object.__setattr__(self, "g", g)

    @property
    def order(self) -> int:
        return len(self.g)

    def __len__(self):
        return len(self.g)

    def __iter__(self):
        return iter(self.g)


@dataclass(frozen=True)
class LadderElement:
    index: int
    orientation: str  # "series" | "shunt"
    element: str  # "inductor" | "capacitor"
    value: float

    @property
    def label(self) -> str:
        return f"{'L' if self.element == 'inductor' else 'C'}{self.index}"


@dataclass(frozen=True)
class LadderElements:
    """Synthesised arm, listed from the terminated port (index 1) inward."""

    elements: tuple[LadderElement, ...]
    spec: FilterSpec

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.elements])

    def as_two_port(self) -> list[tuple[str, str, float]]:
        """``(orientation, kind, value)`` from the junction side to the terminated port."""
        return [(e.orientation, e.element, e.value) for e in reversed(self.elements)]


# ---------------------------------------------------------------------------
# Prototype values
# ---------------------------------------------------------------------------


def _ripple_eps(ripple_db: float) -> float:
    # epsilon^2 = 10^(L_ar/10) - 1
    return math.sqrt(10 ** (ripple_db / 10) - 1)


def cutoff_scale_factor(n: int, ripple_db: float) -> float:
    """Ratio k_n between a Chebyshev filter's 3 dB frequency and its ripple cutoff.

    k_n = cosh(acosh(sqrt(1/eps2))/n), with eps2 = 10^(L_ar/10) - 1.  Ripples
    above ~3.01 dB give sqrt(1/eps2) < 1; the acosh then goes imaginary and the
    factor drops below one (the cosine branch), which is returned as such.
    """
    if n < 1 or not ripple_db > 0:
        raise ValueError("need n >= 1 and ripple_db > 0")
    eps2 = 10 ** (ripple_db / 10) - 1
    x = math.sqrt(1 / eps2)
    if x >= 1:
        return math.cosh(math.acosh(x) / n)
    return math.cos(math.acos(x) / n)


def _chebyshev_denominator(n: int, eps: float) -> np.ndarray:
    """Monic Hurwitz polynomial (ascending coefficients) of the Chebyshev-I poles."""
    a = math.asinh(1 / eps) / n
    theta = (2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n)
    poles = -math.sinh(a) * np.sin(theta) + 1j * math.cosh(a) * np.cos(theta)
    return np.real(np.poly(poles))[::-1]


def _even_part_numerator(den: np.ndarray, k2: float) -> np.ndarray:
    """Solve N(s)D(-s) + N(-s)D(s) = 2 k2 for N of degree n-1."""
    n = den.size - 1
    alt = (-1.0) ** np.arange(n + 1)
    a = np.zeros((2 * n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col = P.polyadd(P.polymul(e, den * alt), P.polymul(e * alt[:n], den))
        a[: col.size, j] = col
    rhs = np.zeros(2 * n)
    rhs[0] = 2 * k2
    num, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    return num


def _cauer_expand(num: np.ndarray, den: np.ndarray, n: int) -> tuple[list[float], float]:
    """Continued-fraction expansion about s = infinity of num/den (descending coefficients)."""
    g = []
    for _ in range(n):
        q = num[0] / den[0]
        g.append(q)
        rem = num - np.concatenate([q * den, [0.0]])
        if den.size == 1:
            # what is left is the terminating resistor
            num, den = den, rem[1:]
            break
        # the two leading terms cancel for a realisable ladder
        if abs(rem[1]) > 1e-8 * np.abs(rem).max():
            raise PrototypeUnavailableError("remainder is not a ladder section")
        num, den = den, rem[2:]
    if len(g) != n or den.size != 1 or num.size != 1:
        raise PrototypeUnavailableError("ladder expansion did not terminate in a resistor")
    return g, float(num[0] / den[0])


def singly_terminated_prototype(n: int, ripple_db: float) -> PrototypeCoefficients:
    eps = _ripple_eps(ripple_db)
    den = _chebyshev_denominator(n, eps)
    # DC transfer of a zero-impedance-source ladder is unity, which fixes the
    # level at 1 + eps^2 T_n(0)^2 for even orders
    t0 = 0.0 if n % 2 else 1.0
    k2 = (1 + eps**2 * t0) / (eps**2 * 4 ** (n - 1))
    num = _even_part_numerator(den, k2)
    # driving-point impedance D/N seen from the zero-impedance end
    g_from_source, load = _cauer_expand(den[::-1].copy(), num[::-1].copy(), n)
    g = g_from_source[::-1]
    if any(not (x > 0 and math.isfinite(x)) for x in g) or not load > 0:
        raise PrototypeUnavailableError(f"singly-terminated prototype unavailable for n={n}")
    return PrototypeCoefficients(tuple(g), "singly", load)


def doubly_terminated_prototype(n: int, ripple_db: float) -> PrototypeCoefficients:
    eps = _ripple_eps(ripple_db)
    beta = math.asinh(1 / eps) / n
    sb = math.sinh(beta)
    a = [math.sin((2 * k - 1) * math.pi / (2 * n)) for k in range(1, n + 1)]
    b = [sb**2 + math.sin(k * math.pi / n) ** 2 for k in range(1, n + 1)]
    g = [2 * a[0] / sb]
    for k in range(1, n):
        g.append(4 * a[k - 1] * a[k] / (b[k - 1] * g[k - 1]))
    load = 1.0 if n % 2 else 1 / math.tanh(beta / 4) ** 2
    return PrototypeCoefficients(tuple(g), "doubly", load)


def chebyshev_prototype(n: int, ripple_db: float, termination: str = "singly") -> PrototypeCoefficients:
    """Chebyshev-I low-pass prototype values g_1..g_n (unit cutoff, unit termination)."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if not ripple_db > 0:
        raise ValueError("ripple_db must be positive")
    if termination == "singly":
        return singly_terminated_prototype(int(n), ripple_db)
    if termination == "doubly":
        return doubly_terminated_prototype(int(n), ripple_db)
    raise PrototypeUnavailableError(f"prototype unavailable for termination {termination!r}")


def prototype_response(g: PrototypeCoefficients, w: np.ndarray) -> np.ndarray:
    """Power transfer |V_load/V_source|^2 of the normalised prototype ladder.

    The ladder starts with a series inductor at the resistive end and is
    driven by an ideal voltage source at the other end (singly terminated),
    or through a unit source resistance (doubly terminated; the value is then
    the transducer gain 4 R_s/R_L |V_L/V_s|^2).
    """
    w = np.asarray(w, dtype=float)
    s = 1j * w
    # walk from the load towards the source accumulating (V, I) at each cut
    v = np.ones_like(s)
    i = v / g.load
    for k, gk in enumerate(g.g):
        if k % 2 == 0:
            v = v + i * s * gk  # series inductor
        else:
            i = i + v * s * gk  # shunt capacitor
    if g.termination == "singly":
        return 1.0 / np.abs(v) ** 2
    vs = v + i * 1.0
    return 4 / g.load / np.abs(vs) ** 2


# ---------------------------------------------------------------------------
# Frequency / impedance scaling
# ---------------------------------------------------------------------------


def synthesize_lowpass(spec: FilterSpec, g: PrototypeCoefficients) -> LadderElements:
    """Series-L / shunt-C ladder scaled to ``spec.z0`` and the cutoff f_cx/k_n."""
    if spec.kind != "low-pass":
        raise ValueError("synthesize_lowpass needs a low-pass FilterSpec")
    wc = 2 * math.pi * spec.cutoff_hz
    out = []
    for k, gk in enumerate(g.g, start=1):
        if k % 2:
            out.append(LadderElement(k, "series", "inductor", gk * spec.z0 / wc))
        else:
            out.append(LadderElement(k, "shunt", "capacitor", gk / (spec.z0 * wc)))
    return LadderElements(tuple(out), spec)


def synthesize_highpass(spec: FilterSpec, g: PrototypeCoefficients) -> LadderElements:
    """Series-C / shunt-L ladder from the low-pass prototype by s -> wc/s."""
    if spec.kind != "high-pass":
        raise ValueError("synthesize_highpass needs a high-pass FilterSpec")
    wc = 2 * math.pi * spec.cutoff_hz
    out = []
    for k, gk in enumerate(g.g, start=1):
        if k % 2:
            out.append(LadderElement(k, "series", "capacitor", 1 / (gk * spec.z0 * wc)))
        else:
            out.append(LadderElement(k, "shunt", "inductor", spec.z0 / (gk * wc)))
    return LadderElements(tuple(out), spec)


def recover_prototype(ladder: LadderElements) -> np.ndarray:
    """Invert the scaling formulas: element values back to g_k."""
    spec = ladder.spec
    wc = 2 * math.pi * spec.cutoff_hz
    g = []
    for e in ladder:
        if spec.kind == "low-pass":
            g.append(e.value * wc / spec.z0 if e.element == "inductor" else e.value * spec.z0 * wc)
        else:
            g.append(1 / (e.value * spec.z0 * wc) if e.element == "capacitor" else spec.z0 / (e.value * wc))
    return np.array(g)


def synthesize(spec: FilterSpec) -> LadderElements:
    g = chebyshev_prototype(spec.order, spec.ripple_db, spec.termination)
    if spec.kind == "low-pass":
        return synthesize_lowpass(spec, g)
    return synthesize_highpass(spec, g)


# ---------------------------------------------------------------------------
# Diplexer
# ---------------------------------------------------------------------------


def _arm_elements(arm: LadderElements, common: str, out: str, tag: str) -> list[Element]:
    """Lay an arm between the junction node and its output node.

    The element adjacent to the junction is the last prototype element (the
    zero-impedance end of a singly-terminated design); element 1, always a
    series element, lands on the output port.
    """
    elems = []
    prev = common
    for e in reversed(arm.elements):
        label = f"{tag}_{e.label}"
        if e.orientation == "series":
            nxt = out if e.index == 1 else f"{tag}{e.index}"
            elems.append(Element(e.element, e.value, prev, nxt, label))
            prev = nxt
        else:
            elems.append(Element(e.element, e.value, prev, "0", label))
    return elems


def diplexer_netlist(lpf: LadderElements, hpf: LadderElements | None, z0: float = 50.0) -> Netlist:
    """Three-port parallel diplexer: port 1 common, 2 low-pass out, 3 high-pass out.

    An empty or missing high-pass arm gives the two-port low-pass filter.
    """
    arms = [a for a in (lpf, hpf) if a is not None and len(a)]
    for a in arms:
        if not math.isclose(a.spec.z0, z0, rel_tol=1e-12):
            raise InconsistentDesignError(f"arm designed for {a.spec.z0} ohm, diplexer uses {z0} ohm")
    if len(arms) == 2 and not math.isclose(lpf.spec.crossover_hz, hpf.spec.crossover_hz, rel_tol=1e-12):
        raise InconsistentDesignError("arms designed for different crossover frequencies")
    elems = _arm_elements(lpf, "com", "lo", "lp")
    ports = [Port("com", z0), Port("lo", z0)]
    if hpf is not None and len(hpf):
        elems += _arm_elements(hpf, "com", "hi", "hp")
        ports.append(Port("hi", z0))
    return Netlist(tuple(elems), tuple(ports))


def design_diplexer(spec: FilterSpec) -> tuple[LadderElements, LadderElements, Netlist]:
    lpf = synthesize(spec.with_kind("low-pass"))
    hpf = synthesize(spec.with_kind("high-pass"))
    return lpf, hpf, diplexer_netlist(lpf, hpf, spec.z0)


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


def spec_from_document(doc: dict) -> FilterSpec:
    """Build a FilterSpec from ``{n, ripple_db, crossover_hz, z0_ohm[, termination]}``."""
    try:
        return FilterSpec(
            order=int(doc["n"]),
            ripple_db=float(doc["ripple_db"]),
            crossover_hz=float(doc["crossover_hz"]),
            z0=float(doc.get("z0_ohm", 50.0)),
            termination=doc.get("termination", "singly"),
        )
    except KeyError as exc:
        raise ValueError(f"design document missing field {exc.args[0]!r}") from None


def load_design(path) -> FilterSpec:
    return spec_from_document(json.loads(Path(path).read_text()))


def component_rows(lpf: LadderElements, hpf: LadderElements) -> list[dict]:
    rows = []
    for arm, name in ((lpf, "lpf"), (hpf, "hpf")):
        for e in arm:
            rows.append(
                {
                    "index": e.index,
                    "arm": name,
                    "orientation": e.orientation,
                    "element": e.element,
                    "value_si": e.value,
                }
            )
    return rows


def write_component_report(path, lpf: LadderElements, hpf: LadderElements) -> None:
    rows = component_rows(lpf, hpf)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["index", "arm", "orientation", "element", "value_si"])
        w.writeheader()
        for r in rows:
            w.writerow({**r, "value_si": repr(r["value_si"])})
