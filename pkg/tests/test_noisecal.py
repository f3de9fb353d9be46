import math
import warnings

import mpmath
import numpy as np
import pytest
from scipy import stats
from scipy.constants import e as QE, h as H, k as KB
from sklearn.base import clone

from dtwpa import noisecal as nc


def sntj_reference(t, f, v):
    hf = mpmath.mpf(H) * f
    two_kt = 2 * mpmath.mpf(KB) * t
    tot = 0
    for sgn in (1, -1):
        u = mpmath.mpf(QE) * v + sgn * hf
        tot += (u / hf) * mpmath.coth(u / two_kt) if u != 0 else two_kt / hf
    return float(tot / 4)


@pytest.mark.parametrize("t", [0.02, 0.1, 1.0])
@pytest.mark.parametrize("v", [0.0, 1e-6, 2.5e-5, -4e-5, 3e-4])
def test_sntj_exact_against_arbitrary_precision(t, v):
    p = nc.SntjParams(t, 6e9)
    assert nc.sntj_input_noise(p, v) == pytest.approx(sntj_reference(t, 6e9, v), rel=1e-10)


def test_sntj_limits():
    f = 6e9
    # cold, unbiased: vacuum half quantum
    assert nc.sntj_input_noise(nc.SntjParams(1e-3, f), 0.0) == pytest.approx(0.5, rel=1e-9)
    # large bias: shot noise eV / 2hf
    v = 1e-3
    assert nc.sntj_input_noise(nc.SntjParams(0.02, f), v) == pytest.approx(QE * v / (2 * H * f), rel=1e-6)
    # hot, unbiased: kT/hf
    assert nc.sntj_input_noise(nc.SntjParams(50.0, f), 0.0) == pytest.approx(KB * 50 / (H * f), rel=1e-4)
    # the asymptotic kernel is the cold limit of the exact one
    vs = np.linspace(-1e-4, 1e-4, 11)
    cold = nc.sntj_input_noise(nc.SntjParams(1e-4, f), vs)
    assert np.allclose(nc.sntj_input_noise(nc.SntjParams(1e-4, f), vs, "asymptotic"), cold, rtol=1e-9)


def test_sntj_even_in_bias_and_validation():
    p = nc.SntjParams(0.05, 5e9)
    v = np.linspace(0, 1e-4, 7)
    assert np.allclose(nc.sntj_input_noise(p, v), nc.sntj_input_noise(p, -v))
    with pytest.raises(ValueError):
        nc.sntj_input_noise(p, v, "bogus")
    with pytest.raises(ValueError):
        nc.SntjParams(0.0, 5e9)


def test_idler_port_contribution():
    assert nc.idler_port_contribution(0.0, 10e9) == 0.5
    assert nc.idler_port_contribution(0.05, 10e9) == pytest.approx(0.5, abs=1e-3)
    hot = nc.idler_port_contribution(10.0, 10e9)
    assert hot == pytest.approx(KB * 10 / (H * 10e9), rel=1e-2)


def test_quanta_psd_roundtrip():
    assert nc.psd_to_quanta(nc.quanta_to_psd(3.2, 7e9), 7e9) == pytest.approx(3.2)


def test_chain_fit_recovers_noiseless_line():
    n_in = np.linspace(0.5, 20, 15)
    sweep = nc.NoiseSweep(6e9, n_in, nc.forward_chain_noise(n_in, 3.0e7, 1.9))
    fit = nc.fit_chain_noise(sweep)
    assert fit.g_tot == pytest.approx(3.0e7, rel=1e-12)
    assert fit.n_add == pytest.approx(1.9, rel=1e-10)
    assert fit.n_add_err < 1e-8


def test_chain_fit_matches_linregress(rng):
    n_in = np.linspace(0.5, 20, 30)
    y = nc.forward_chain_noise(n_in, 120.0, 2.3) + rng.normal(0, 15.0, n_in.size)
    est = nc.ChainNoiseFit().fit(n_in, y)
    ref = stats.linregress(n_in, y)
    assert est.g_tot_ == pytest.approx(ref.slope, rel=1e-12)
    assert est.g_tot_ * est.n_add_ == pytest.approx(ref.intercept, rel=1e-10)
    assert est.g_tot_err_ == pytest.approx(ref.stderr, rel=1e-10)
    assert np.allclose(est.predict(n_in), ref.intercept + ref.slope * n_in)


def test_chain_fit_large_offset_is_conditioned():
    n_in = 1e6 + np.linspace(0, 10, 11)
    fit = nc.ChainNoiseFit().fit(n_in, 2.0 * (n_in + 3.0))
    assert fit.n_add_ == pytest.approx(3.0, abs=1e-5)


def test_chain_fit_errors():
    with pytest.raises(nc.IllConditionedFitError):
        nc.ChainNoiseFit().fit([1.0, 1.0, 1.0], [2.0, 3.0, 4.0])
    with pytest.raises(nc.UnphysicalGainError):
        nc.ChainNoiseFit().fit([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    with pytest.warns(nc.NegativeNoiseWarning):
        nc.ChainNoiseFit().fit([1.0, 2.0, 3.0], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        nc.NoiseSweep(6e9, [1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        nc.NoiseSweep(6e9, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0], unit="dBm")


def test_watt_per_hz_sweep_converts():
    f = 6e9
    n_in = np.array([1.0, 3.0, 5.0, 9.0])
    out_w = nc.quanta_to_psd(nc.forward_chain_noise(n_in, 50.0, 2.0), f)
    fit = nc.fit_chain_noise(nc.NoiseSweep(f, n_in, out_w, unit="W/Hz"))
    assert fit.g_tot == pytest.approx(50.0) and fit.n_add == pytest.approx(2.0)


def test_from_bias_and_path_loss():
    v = np.linspace(-2e-4, 2e-4, 9)
    s = nc.NoiseSweep.from_bias(6e9, v, np.ones(9), 0.03)
    assert np.allclose(s.n_in, nc.sntj_input_noise(nc.SntjParams(0.03, 6e9), v))
    lossy = nc.NoiseSweep.from_bias(6e9, v, np.ones(9), 0.03, path_loss=0.5)
    assert np.allclose(lossy.n_in, 0.5 * s.n_in + 0.5 * nc.idler_port_contribution(0.03, 6e9))
    with pytest.raises(ValueError):
        nc.NoiseSweep.from_bias(6e9, v, np.ones(9), 0.03, path_loss=1.5)


def test_estimators_follow_sklearn_conventions():
    est = nc.TwpaNoiseDecomposition(exclusion=None, weighted=False)
    assert est.get_params() == {"exclusion": None, "mask": None, "weighted": False}
    c = clone(est)
    assert c is not est and c.get_params() == est.get_params()
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        nc.ChainNoiseFit().predict([1.0])
    g = np.array([2.0, 4.0, 8.0, 16.0])
    est.fit(g, 1.0 + 10.0 / g)
    assert est.predict([5.0])[0] == pytest.approx(3.0)
    assert nc.ChainNoiseFit().fit([1, 2, 3, 4], [4, 6, 8, 10]).score([1, 2, 3, 4], [4, 6, 8, 10]) == pytest.approx(1.0)


def test_min_noise_exclusion_ties():
    g = np.array([1.0, 2.0, 3.0, 4.0])
    assert list(nc.min_noise_exclusion(g, [3.0, 1.0, 1.0, 2.0])) == [False, False, False, True]


def test_decomposition_exact_recovery():
    g_db, n, _ = nc.synthetic_gain_sweep(rel_noise=0.0)
    d = nc.decompose_twpa_noise(g_db, n, gain_unit="db")
    assert d.n_twpa == pytest.approx(1.17, abs=1e-9)
    assert d.n_rem == pytest.approx(16.6, abs=1e-8)
    assert d.excluded.sum() == 2 and d.excluded[-2:].all()


def test_decomposition_weighted_matches_curve_fit(rng):
    g_db, n, err = nc.synthetic_gain_sweep(rel_noise=0.05, rising_db=(), seed=3)
    g = nc.db_to_linear(g_db)
    d = nc.decompose_twpa_noise(g, n, err, exclusion=None)
    from scipy.optimize import curve_fit

    popt, pcov = curve_fit(lambda x, a, b: a + b * x, 1 / g, n, sigma=err, absolute_sigma=True)
    assert d.n_twpa == pytest.approx(popt[0], rel=1e-8)
    assert d.n_rem == pytest.approx(popt[1], rel=1e-8)
    assert d.n_twpa_err == pytest.approx(math.sqrt(pcov[0, 0]), rel=1e-6)


def test_decomposition_mask_and_failures():
    g = np.array([2.0, 4.0, 8.0, 16.0, 32.0])
    n = 1.0 + 10.0 / g
    d = nc.decompose_twpa_noise(g, n, mask=[False, False, False, False, True])
    assert d.excluded.tolist() == [False] * 4 + [True]
    with pytest.raises(nc.InsufficientPointsError):
        nc.decompose_twpa_noise(g[:2], n[:2], exclusion=None)
    with pytest.raises(ValueError):
        nc.decompose_twpa_noise(g, n, mask=[True])
    with pytest.raises(ValueError):
        nc.decompose_twpa_noise(g, n, gain_unit="neper")
    with pytest.raises(ValueError):
        nc.decompose_twpa_noise(g, n, exclusion="bogus")


def test_quantum_limit_correction():
    assert nc.quantum_limit_correction(1.0) == 0.0
    assert nc.quantum_limit_correction(1e6) == pytest.approx(0.5, abs=1e-6)
    assert nc.quantum_limit_correction(2.0, 0.1) == pytest.approx(0.35)
    with pytest.raises(ValueError):
        nc.quantum_limit_correction(0.5)


def test_attenuation_cancels_output_gain():
    f = np.array([5e9, 6e9, 7e9])
    a_true = np.array([1e-7, 2e-7, 3e-7])
    g_out = np.array([1e9, 2e9, 4e9])
    p_vna = np.full(3, 1e-3)
    s_in = np.full(3, 1e-23)
    cal = nc.AttenuationCal.from_measurements(f, p_vna, a_true * g_out * p_vna, s_in, g_out * s_in)
    assert np.allclose(cal.attenuation, a_true)
    assert np.allclose(cal.attenuation_db, 10 * np.log10(a_true))
    assert not cal.inconsistent.any()
    assert np.allclose(nc.output_gain(g_out * s_in, s_in), g_out)


def test_attenuation_above_unity_is_flagged(tmp_path):
    with pytest.warns(nc.CalibrationWarning):
        cal = nc.AttenuationCal.from_measurements([6e9], [1.0], [2.0], [1.0], [1.0])
    assert cal.inconsistent.tolist() == [True]
    cal.to_csv(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[1].endswith(",1")
    with pytest.raises(ValueError):
        nc.input_attenuation([0.0], [1.0], [1.0], [1.0])


def test_power_at_device():
    assert nc.power_at_device(-20.0, 56.8) == pytest.approx(-76.8)
    with pytest.raises(ValueError):
        nc.power_at_device(-20.0, -1.0)


def test_file_readers(tmp_path):
    p = tmp_path / "sweeps.csv"
    lines = ["f_hz,n_in_quanta,n_out"]
    for f in (6e9, 7e9):
        for x in (1.0, 2.0, 4.0):
            lines.append(f"{f},{x},{10 * (x + 2)}")
    p.write_text("\n".join(lines) + "\n")
    sweeps = nc.read_noise_sweeps(p)
    assert [s.frequency for s in sweeps] == [6e9, 7e9]
    fits = [nc.fit_chain_noise(s) for s in sweeps]
    nc.write_chain_fits(fits, tmp_path / "fits.csv")
    assert len((tmp_path / "fits.csv").read_text().splitlines()) == 3
    q = tmp_path / "g.csv"
    q.write_text("g_twpa_db,n_add_quanta\n3,9\n6,5\n")
    g, n, err = nc.read_gain_table(q)
    assert err is None and g.tolist() == [3.0, 6.0]
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="missing"):
        nc.read_gain_table(tmp_path / "bad.csv")


def test_idler_port_examples():
    assert abs(nc.idler_port_contribution(0.014, 11e9) - 0.5) < 1e-6
    assert nc.idler_port_contribution(300.0, 11e9) == pytest.approx(568, rel=2e-3)


def test_sntj_monotone_in_temperature():
    temps = np.array([0.01, 0.02, 0.05, 0.1, 0.5, 2.0])
    for v in (0.0, 2e-5, 1e-4):
        vals = [nc.sntj_input_noise(nc.SntjParams(t, 7.74e9), v) for t in temps]
        assert np.all(np.diff(vals) >= 0)


def test_decomposition_exact_with_other_remainder():
    g = nc.db_to_linear(np.array([3.0, 6.0, 9.0, 12.0]))
    d = nc.decompose_twpa_noise(g, 1.17 + 12.0 / g, exclusion=None)
    assert d.n_twpa == pytest.approx(1.17, rel=1e-12) and d.n_rem == pytest.approx(12.0, rel=1e-12)


def test_rising_points_do_not_move_the_fit():
    g_db, n, err = nc.synthetic_gain_sweep(rel_noise=0.02, seed=4, rising_db=())
    base = nc.decompose_twpa_noise(g_db, n, err, gain_unit="db")
    with_out = nc.decompose_twpa_noise(np.r_[g_db, 14.0, 15.0], np.r_[n, n.min() + 0.6, n.min() + 1.2], np.r_[err, 0.05, 0.05], gain_unit="db")
    assert with_out.excluded[-2:].all()
    assert (with_out.n_twpa, with_out.n_rem) == (base.n_twpa, base.n_rem)


def test_db_and_linear_interfaces_agree():
    g_db, n, err = nc.synthetic_gain_sweep(rel_noise=0.03, seed=2)
    a = nc.decompose_twpa_noise(g_db, n, err, gain_unit="db")
    b = nc.decompose_twpa_noise(nc.db_to_linear(g_db), n, err)
    assert a.n_twpa == b.n_twpa and a.n_rem == b.n_rem


def test_output_gain_agrees_with_chain_fit_slope():
    f = 7e9
    n_in = np.linspace(0.5, 12, 9)
    g = 1e6
    s_out = nc.quanta_to_psd(nc.forward_chain_noise(n_in, g, 2.0), f)
    fit = nc.fit_chain_noise(nc.NoiseSweep(f, n_in, s_out, unit="W/Hz"))
    # with the added noise removed, the PSD ratio is the chain gain
    ratio = nc.output_gain(s_out, nc.quanta_to_psd(n_in + fit.n_add, f))
    assert np.allclose(ratio, fit.g_tot, rtol=1e-10)
    assert nc.output_gain([1e6], [1.0])[0] == pytest.approx(nc.db_to_linear(60.0))
