"""Noise and power calibration of an amplifier chain.

All noise quantities are in quanta (units of h f per unit bandwidth) at the
frequency of the bin they belong to.  The fits follow the scikit-learn
estimator protocol so they compose with its model-selection tools:

>>> est = ChainNoiseFit().fit(n_in, n_out)      # doctest: +SKIP
>>> est.g_tot_, est.n_add_                      # doctest: +SKIP
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import constants as const
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

H = const.h
KB = const.k
QE = const.e


class IllConditionedFitError(ValueError):
    """Input noise values do not span a range, so the line fit is undetermined."""


class UnphysicalGainError(ValueError):
    """Fitted chain gain is not positive."""


class InsufficientPointsError(ValueError):
    pass


class CalibrationWarning(UserWarning):
    """Calibration data are internally inconsistent (e.g. attenuation above unity)."""


class NegativeNoiseWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Noise sources
# ---------------------------------------------------------------------------


def _ycoth(y):
    """y coth(y), finite at y = 0."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-6
    safe = np.where(small, 1.0, y)
    return np.where(small, 1.0 + y * y / 3.0, safe / np.tanh(safe))


@dataclass(frozen=True)
class SntjParams:
    temperature: float  # kelvin
    frequency: float  # Hz

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")


def sntj_input_noise(params: SntjParams, v, kernel: str = "exact"):
    """Noise (quanta) delivered by a voltage-biased tunnel junction.

    ``kernel="exact"`` evaluates the two-branch coth expression
    ``1/4 sum_+- ((eV +- hf)/hf) coth((eV +- hf)/(2 kT))``; ``"asymptotic"``
    uses its zero-temperature limit ``max(e|V|, hf) / (2 hf)``.
    """
    v = np.asarray(v, dtype=float)
    hf = H * params.frequency
    if kernel == "asymptotic":
        return np.maximum(QE * np.abs(v), hf) / (2 * hf)
    if kernel != "exact":
        raise ValueError(f"unknown kernel {kernel!r}")
    two_kt = 2 * KB * params.temperature
    ev = QE * v
    # u coth(u / 2kT) = 2kT * y coth(y)
    total = _ycoth((ev + hf) / two_kt) + _ycoth((ev - hf) / two_kt)
    return 0.25 * two_kt * total / hf


def idler_port_contribution(t_idler: float, f_i: float) -> float:
    """Thermal plus vacuum noise (quanta) entering the idler port, (1/2) coth(hf / 2kT)."""
    if t_idler < 0 or not f_i > 0:
        raise ValueError("need t_idler >= 0 and f_i > 0")
    if t_idler == 0:
        return 0.5
    return 0.5 / math.tanh(H * f_i / (2 * KB * t_idler))


def psd_to_quanta(s, f):
    """W/Hz to quanta at frequency ``f``."""
    return np.asarray(s, dtype=float) / (H * np.asarray(f, dtype=float))


def quanta_to_psd(n, f):
    return np.asarray(n, dtype=float) * H * np.asarray(f, dtype=float)


# ---------------------------------------------------------------------------
# Chain noise (output vs input noise line)
# ---------------------------------------------------------------------------

UNITS = ("quanta", "W/Hz", "arb")


@dataclass(frozen=True)
class NoiseSweep:
    """Output noise recorded against known input noise at one frequency bin.

    ``unit`` tags ``n_out``: ``"quanta"``, ``"W/Hz"`` (converted with the bin
    frequency) or ``"arb"`` for any quantity proportional to power, in which
    case the fitted gain is in those units per quantum.
    """

    frequency: float
    n_in: np.ndarray
    n_out: np.ndarray
    unit: str = "quanta"

    def __post_init__(self):
        n_in = np.asarray(self.n_in, dtype=float)
        n_out = np.asarray(self.n_out, dtype=float)
        object.__setattr__(self, "n_in", n_in)
        object.__setattr__(self, "n_out", n_out)
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")
        if n_in.shape != n_out.shape or n_in.ndim != 1:
            raise ValueError("n_in and n_out must be equal-length vectors")
        if n_in.size < 3:
            raise ValueError("a noise sweep needs at least 3 samples")
        if not (np.all(np.isfinite(n_in)) and np.all(np.isfinite(n_out))):
            raise ValueError("noise samples must be finite")

    def output_quanta(self) -> np.ndarray:
        if self.unit == "W/Hz":
            return psd_to_quanta(self.n_out, self.frequency)
        return self.n_out

    @classmethod
    def from_bias(cls, frequency, bias_v, n_out, temperature, kernel="exact", unit="quanta", path_loss=1.0):
        """Sweep whose input noise is computed from SNTJ bias voltages.

        ``path_loss`` (linear power transmission, <= 1) optionally accounts
        for attenuation between the junction and the amplifier input.
        """
        if not 0 < path_loss <= 1:
            raise ValueError("path_loss must lie in (0, 1]")
        n_src = sntj_input_noise(SntjParams(temperature, frequency), bias_v, kernel)
        # an attenuator at the same temperature mixes in its own vacuum/thermal noise
        n_bath = idler_port_contribution(temperature, frequency)
        n_in = path_loss * n_src + (1 - path_loss) * n_bath
        return cls(frequency, n_in, n_out, unit)


@dataclass(frozen=True)
class ChainFit:
    frequency: float
    g_tot: float
    n_add: float
    g_tot_err: float
    n_add_err: float

    def to_dict(self) -> dict:
        return asdict(self)


def _line_fit(x, y, w=None, absolute_sigma=False):
    """Weighted least squares y = a + b x; returns (a, b, cov)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    spread = np.ptp(x)
    if spread <= 1e-12 * max(np.max(np.abs(x)), 1e-300):
        raise IllConditionedFitError("regressor values do not span a range")
    # centred normal equations keep the fit well conditioned for large offsets
    sw = w.sum()
    xm = np.dot(w, x) / sw
    ym = np.dot(w, y) / sw
    dx = x - xm
    sxx = np.dot(w, dx * dx)
    b = np.dot(w, dx * (y - ym)) / sxx
    a = ym - b * xm
    var_b = 1.0 / sxx
    var_a = 1.0 / sw + xm * xm / sxx
    cov_ab = -xm / sxx
    cov = np.array([[var_a, cov_ab], [cov_ab, var_b]])
    if not absolute_sigma:
        dof = x.size - 2
        resid = y - (a + b * x)
        s2 = np.dot(w, resid * resid) / dof if dof > 0 else 0.0
        cov = cov * s2
    return float(a), float(b), cov


class ChainNoiseFit(RegressorMixin, BaseEstimator):
    """Ordinary least-squares fit of ``n_out = g_tot (n_in + n_add)``.

    ``fit(X, y)`` takes input noise (quanta) as X, a vector or a single
    column, and output noise as y.  Fitted attributes end in ``_``.
    """

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.size != y.size or x.size < 3:
            raise ValueError("need at least 3 paired samples")
        a, b, cov = _line_fit(x, y)
        if not b > 0:
            raise UnphysicalGainError(f"fitted gain {b:g} is not positive")
        self.g_tot_ = b
        self.n_add_ = a / b
        # first-order propagation for the ratio a / b
        ja = np.array([1 / b, -a / b**2])
        self.g_tot_err_ = math.sqrt(max(cov[1, 1], 0.0))
        self.n_add_err_ = math.sqrt(max(ja @ cov @ ja, 0.0))
        self.coef_cov_ = cov
        if self.n_add_ <= 0:
            warnings.warn(f"fitted added noise {self.n_add_:g} is not positive", NegativeNoiseWarning, stacklevel=2)
        return self

    def predict(self, X):
        check_is_fitted(self, "g_tot_")
        return self.g_tot_ * (np.asarray(X, dtype=float).reshape(-1) + self.n_add_)


def fit_chain_noise(sweep: NoiseSweep) -> ChainFit:
    est = ChainNoiseFit().fit(sweep.n_in, sweep.output_quanta())
    return ChainFit(sweep.frequency, est.g_tot_, est.n_add_, est.g_tot_err_, est.n_add_err_)


def quantum_limit_correction(g_twpa, n_ex=0.0):
    """Added noise of a phase-insensitive amplifier, (G - 1)/(2G) + N_ex."""
    g = np.asarray(g_twpa, dtype=float)
    if np.any(g < 1):
        raise ValueError("amplifier gain must be >= 1")
    out = (g - 1) / (2 * g) + n_ex
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Amplifier / remaining-chain decomposition
# ---------------------------------------------------------------------------


def db_to_linear(db):
    return 10 ** (np.asarray(db, dtype=float) / 10)


def linear_to_db(g):
    return 10 * np.log10(np.asarray(g, dtype=float))


def min_noise_exclusion(gain, n_add) -> np.ndarray:
    """Boolean mask (True = excluded) of points above the gain of minimum added noise.

    Several points sharing the minimum keep the largest of their gains, so
    ties fall on the inclusion side.
    """
    g = np.asarray(gain, dtype=float)
    n = np.asarray(n_add, dtype=float)
    g_star = np.max(g[n == n.min()])
    return g > g_star


@dataclass(frozen=True)
class ChainDecomposition:
    n_twpa: float
    n_rem: float
    n_twpa_err: float
    n_rem_err: float
    excluded: np.ndarray
    gain: np.ndarray
    n_add: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n_twpa": self.n_twpa,
            "n_rem": self.n_rem,
            "n_twpa_err": self.n_twpa_err,
            "n_rem_err": self.n_rem_err,
            "excluded": [bool(v) for v in self.excluded],
            "gain_linear": [float(v) for v in self.gain],
            "n_add": [float(v) for v in self.n_add],
        }


class TwpaNoiseDecomposition(BaseEstimator):
    """Fit ``n_add = n_twpa + n_rem / G`` over a set of amplifier gains.

    Parameters
    ----------
    exclusion : {"min-noise", None}
        ``"min-noise"`` masks points above the gain where the added noise is
        smallest (they sit on the rising branch of the gain-noise tradeoff).
    mask : array of bool, optional
        Manual exclusion mask in input order; overrides ``exclusion``.
    weighted : bool
        Weight by ``1/err^2`` when per-point errors are passed to ``fit``;
        the errors are then taken as absolute.
    """

    def __init__(self, exclusion="min-noise", mask=None, weighted=True):
        self.exclusion = exclusion
        self.mask = mask
        self.weighted = weighted

    def fit(self, X, y, sample_err=None):
        g = np.asarray(X, dtype=float).reshape(-1)
        n = np.asarray(y, dtype=float).reshape(-1)
        if g.size != n.size:
            raise ValueError("gain and noise vectors differ in length")
        if np.any(g <= 0):
            raise ValueError("gains must be positive (linear)")
        err = None if sample_err is None else np.asarray(sample_err, dtype=float).reshape(-1)
        if self.mask is not None:
            excl = np.asarray(self.mask, dtype=bool).reshape(-1)
            if excl.size != g.size:
                raise ValueError("mask length differs from the data")
        elif self.exclusion == "min-noise":
            excl = min_noise_exclusion(g, n)
        elif self.exclusion is None:
            excl = np.zeros(g.size, dtype=bool)
        else:
            raise ValueError(f"unknown exclusion rule {self.exclusion!r}")
        keep = ~excl
        if keep.sum() < 3 or np.unique(g[keep]).size < 3:
            raise InsufficientPointsError("need at least 3 retained points with distinct gains")
        # canonical order makes the result independent of input ordering
        order = np.lexsort((n[keep], g[keep]))
        gk, nk = g[keep][order], n[keep][order]
        w = None
        use_w = self.weighted and err is not None
        if use_w:
            ek = err[keep][order]
            if np.any(ek <= 0):
                raise ValueError("per-point errors must be positive")
            w = 1 / ek**2
        a, b, cov = _line_fit(1 / gk, nk, w, absolute_sigma=use_w)
        self.n_twpa_, self.n_rem_ = a, b
        self.n_twpa_err_ = math.sqrt(max(cov[0, 0], 0.0))
        self.n_rem_err_ = math.sqrt(max(cov[1, 1], 0.0))
        self.excluded_ = excl
        if a < 0:
            warnings.warn(f"fitted amplifier noise {a:g} is negative", NegativeNoiseWarning, stacklevel=2)
        return self

    def predict(self, X):
        check_is_fitted(self, "n_twpa_")
        return self.n_twpa_ + self.n_rem_ / np.asarray(X, dtype=float).reshape(-1)


def decompose_twpa_noise(
    gain,
    n_add,
    n_add_err=None,
    gain_unit: str = "linear",
    exclusion="min-noise",
    mask=None,
    weighted: bool = True,
) -> ChainDecomposition:
    if gain_unit == "db":
        g = db_to_linear(gain)
    elif gain_unit == "linear":
        g = np.asarray(gain, dtype=float)
    else:
        raise ValueError("gain_unit must be 'linear' or 'db'")
    est = TwpaNoiseDecomposition(exclusion=exclusion, mask=mask, weighted=weighted).fit(g, n_add, n_add_err)
    return ChainDecomposition(
        est.n_twpa_, est.n_rem_, est.n_twpa_err_, est.n_rem_err_, est.excluded_, g, np.asarray(n_add, dtype=float)
    )


# ---------------------------------------------------------------------------
# Power calibration
# ---------------------------------------------------------------------------


def output_gain(s_out, s_in):
    """Output-line gain from known input and measured output noise PSDs."""
    s_in = np.asarray(s_in, dtype=float)
    if np.any(s_in <= 0):
        raise ValueError("input PSD must be positive")
    return np.asarray(s_out, dtype=float) / s_in


psd_to_input = output_gain


def input_attenuation(p_out, p_vna, s_in, s_out):
    """Input-line attenuation A = (P_out / P_VNA) (S_in / S_out).

    The thru power ratio is A G while the noise ratio is G, so G cancels.
    Values above one are physically impossible for a passive line; they are
    returned unchanged but flagged with a :class:`CalibrationWarning`.
    """
    arrs = [np.asarray(v, dtype=float) for v in (p_out, p_vna, s_in, s_out)]
    if any(np.any(v <= 0) for v in arrs):
        raise ValueError("powers and PSDs must be positive")
    p_out, p_vna, s_in, s_out = arrs
    a = (p_out / p_vna) * (s_in / s_out)
    if np.any(a > 1):
        warnings.warn("input attenuation above unity: calibration inconsistent", CalibrationWarning, stacklevel=2)
    return a


@dataclass
class AttenuationCal:
    frequency: np.ndarray
    attenuation: np.ndarray  # linear power ratio
    p_vna: np.ndarray
    p_out: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray
    inconsistent: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.inconsistent is None:
            self.inconsistent = self.attenuation > 1

    @classmethod
    def from_measurements(cls, frequency, p_vna, p_out, s_in, s_out) -> "AttenuationCal":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            a = input_attenuation(p_out, p_vna, s_in, s_out)
        for w in caught:
            warnings.warn(w.message, w.category, stacklevel=2)
        return cls(*(np.asarray(v, dtype=float) for v in (frequency, a, p_vna, p_out, s_in, s_out)))

    @property
    def attenuation_db(self) -> np.ndarray:
        return linear_to_db(self.attenuation)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["f_hz", "attenuation_linear", "attenuation_db", "inconsistent"])
            for f, a, adb, bad in zip(self.frequency, self.attenuation, self.attenuation_db, self.inconsistent):
                w.writerow([repr(float(f)), repr(float(a)), repr(float(adb)), int(bool(bad))])


def power_at_device(p_source_dbm, attenuation_db):
    """Power reaching the device through a line of ``attenuation_db`` (>= 0) loss."""
    att = np.asarray(attenuation_db, dtype=float)
    if np.any(att < 0):
        raise ValueError("attenuation must be non-negative dB")
    out = np.asarray(p_source_dbm, dtype=float) - att
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


def forward_chain_noise(n_in, g_tot, n_add):
    return g_tot * (np.asarray(n_in, dtype=float) + n_add)


def synthetic_gain_sweep(
    n_twpa: float = 1.17,
    n_rem: float = 16.6,
    gains_db: Sequence[float] = (3.0, 5.0, 7.0, 9.0, 10.5, 12.0, 13.0),
    rising_db: Sequence[float] = (14.0, 15.0),
    rising_slope: float = 0.6,
    rel_noise: float = 0.0,
    seed: int | None = 0,
):
    """Added noise vs amplifier gain following ``n_twpa + n_rem / G``.

    Points at ``rising_db`` lie on a branch where the noise climbs again by
    ``rising_slope`` quanta per dB above the last regular gain, imitating the
    gain-noise tradeoff at high pump power.  Returns (gain_db, n_add, n_err).
    """
    g_db = np.asarray(gains_db, dtype=float)
    n = n_twpa + n_rem / db_to_linear(g_db)
    if len(rising_db):
        r_db = np.asarray(rising_db, dtype=float)
        top = g_db.max()
        n_top = n_twpa + n_rem / db_to_linear(top)
        g_db = np.concatenate([g_db, r_db])
        n = np.concatenate([n, n_top + rising_slope * (r_db - top)])
    err = np.maximum(rel_noise * n, 1e-12)
    if rel_noise > 0:
        rng = np.random.default_rng(seed)
        n = n + rng.normal(0.0, err)
    return g_db, n, err


# ---------------------------------------------------------------------------
# File interfaces
# ---------------------------------------------------------------------------


def _read_rows(path, required: Sequence[str]) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    missing = [c for c in required if c not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return rows


def read_noise_sweeps(path, unit: str = "quanta") -> list[NoiseSweep]:
    """CSV with columns f_hz, n_in_quanta, n_out; one sweep per distinct f_hz."""
    rows = _read_rows(path, ("f_hz", "n_in_quanta", "n_out"))
    groups: dict[float, list] = {}
    for r in rows:
        groups.setdefault(float(r["f_hz"]), []).append((float(r["n_in_quanta"]), float(r["n_out"])))
    return [NoiseSweep(f, [a for a, _ in v], [b for _, b in v], unit) for f, v in sorted(groups.items())]


def read_gain_table(path):
    """CSV with columns g_twpa_db, n_add_quanta, n_add_err -> (gain_db, n_add, err)."""
    rows = _read_rows(path, ("g_twpa_db", "n_add_quanta"))
    g = np.array([float(r["g_twpa_db"]) for r in rows])
    n = np.array([float(r["n_add_quanta"]) for r in rows])
    err = None
    if "n_add_err" in rows[0] and all(r["n_add_err"] not in ("", None) for r in rows):
        err = np.array([float(r["n_add_err"]) for r in rows])
    return g, n, err


def read_calibration_table(path) -> AttenuationCal:
    rows = _read_rows(path, ("f_hz", "p_vna_w", "p_out_w", "s_in", "s_out"))
    cols = {k: np.array([float(r[k]) for r in rows]) for k in ("f_hz", "p_vna_w", "p_out_w", "s_in", "s_out")}
    return AttenuationCal.from_measurements(cols["f_hz"], cols["p_vna_w"], cols["p_out_w"], cols["s_in"], cols["s_out"])


def write_chain_fits(fits: Sequence[ChainFit], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_hz", "g_tot", "g_tot_err", "n_add_quanta", "n_add_err"])
        for f in fits:
            w.writerow([repr(f.frequency), repr(f.g_tot), repr(f.g_tot_err), repr(f.n_add), repr(f.n_add_err)])


def write_summary(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
