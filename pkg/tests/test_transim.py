import math
import warnings

import numpy as np
import pytest

from dtwpa import transim as ts
from dtwpa.rfnet import PHI0, Element, Netlist, Port, nport_sparams


def lc_ladder(n=6, L=2e-9, C=0.8e-12):
    elems, node = [], "a"
    for k in range(n):
        nxt = "b" if k == n - 1 else f"n{k}"
        elems.append(Element("inductor", L, node, nxt))
        elems.append(Element("capacitor", C, nxt, "0"))
        node = nxt
    return Netlist(tuple(elems), (Port("a"), Port("b")))


FAST = dict(resolution=100e6, dt=1e-12, settle_time=10e-9)


def test_linear_ladder_matches_nodal_analysis():
    net = lc_ladder()
    cfg = ts.SimConfig.commensurate(**FAST)
    freqs = [2e9, 4e9, 5.5e9]
    drives = ts.DriveConfig(tuple(ts.Tone(1, f, -100.0, 0.3 * k) for k, f in enumerate(freqs)), ramp_time=2e-9)
    res = ts.simulate_transient(net, drives, cfg)
    ref = nport_sparams(net, freqs)
    for k, f in enumerate(freqs):
        s21 = ts.transmission(res, 2, 1, f)
        s11 = ts.extract_tone(res, 1, f) / ts.incident_amplitude(drives, 1, f)
        assert abs(s21 - ref.s[k, 1, 0]) < 3e-3
        assert abs(s11 - ref.s[k, 0, 0]) < 3e-3
        # lossless network conserves power
        assert abs(s21) ** 2 + abs(s11) ** 2 == pytest.approx(1.0, abs=5e-3)


def test_zero_drive_stays_at_rest():
    res = ts.simulate_transient(lc_ladder(2), ts.DriveConfig(), ts.SimConfig(dt=1e-12, t_end=2e-9, settle_time=1e-9))
    assert np.all(res.voltages == 0.0)


def junction_pair(ic=5e-6):
    return Netlist((Element("josephson", ic, "a", "b"), Element("capacitor", 30e-15, "b", "0")), (Port("a"), Port("b")))


def test_weak_drive_junction_is_linear_inductor():
    net = junction_pair()
    cfg = ts.SimConfig.commensurate(**FAST)
    drives = ts.DriveConfig((ts.Tone(1, 6e9, -110.0),), ramp_time=1e-9)
    s21 = ts.transmission(ts.simulate_transient(net, drives, cfg), 2, 1, 6e9)
    ref = nport_sparams(net.linearized(), [6e9]).s[0, 1, 0]
    assert abs(s21 - ref) < 1e-3


def test_strong_drive_generates_third_harmonic():
    net = junction_pair(ic=0.2e-6)
    cfg = ts.SimConfig.commensurate(**FAST, record_junctions=(0,))
    weak = ts.DriveConfig((ts.Tone(1, 2e9, -125.0),), ramp_time=1e-9)
    strong = ts.DriveConfig((ts.Tone(1, 2e9, -95.0),), ramp_time=1e-9)
    h = []
    for d in (weak, strong):
        res = ts.simulate_transient(net, d, cfg)
        h.append(abs(ts.extract_tone(res, 2, 6e9)) / abs(ts.extract_tone(res, 2, 2e9)))
    assert h[0] < 1e-4 and h[1] > 10 * h[0]


def test_switching_warning_and_runaway():
    net = junction_pair(ic=0.2e-6)
    cfg = ts.SimConfig.commensurate(**FAST)
    with pytest.raises(ts.JunctionRunawayError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ts.simulate_transient(net, ts.DriveConfig((ts.Tone(1, 2e9, -50.0),), ramp_time=1e-9), cfg)


def test_newton_failure_reported():
    net = junction_pair(ic=0.2e-6)
    cfg = ts.SimConfig.commensurate(**FAST, max_newton_iters=1, newton_tol=1e-30)
    with pytest.raises(ts.NewtonConvergenceError) as err:
        ts.simulate_transient(net, ts.DriveConfig((ts.Tone(1, 2e9, -80.0),), ramp_time=1e-9), cfg)
    assert err.value.step >= 1


def test_tone_extraction_of_synthetic_signal():
    dt, n = 1e-12, 10000
    t = np.arange(n) * dt
    x = 0.7 * np.cos(2 * np.pi * 3e9 * t + 0.4) + 0.2 * np.cos(2 * np.pi * 5e9 * t)
    a = ts.tone_amplitude(x, t, 3e9)
    assert abs(a) == pytest.approx(0.7, rel=1e-12)
    assert np.angle(a) == pytest.approx(0.4, abs=1e-12)
    assert abs(ts.tone_amplitude(x, t, 4e9)) < 1e-12
    # hann leaks less than rect away from the grid
    off = 3.05e9
    assert abs(ts.tone_amplitude(x, t, 4.0e9 + 0.05e9, "hann")) < abs(ts.tone_amplitude(x, t, 4.05e9))
    with pytest.raises(ValueError):
        ts.tone_amplitude(x, t, off, "kaiser")


def test_non_commensurate_frequency_is_rejected():
    cfg = ts.SimConfig.commensurate(**FAST)
    res = ts.simulate_transient(lc_ladder(2), ts.DriveConfig((ts.Tone(1, 3e9, -100.0),), ramp_time=1e-9), cfg)
    with pytest.raises(ts.CommensurabilityError):
        ts.extract_tone(res, 2, 3.03e9)
    ts.extract_tone(res, 2, 3.03e9, window="hann")
    assert cfg.snap(3.03e9) == pytest.approx(3.0e9)


def test_commensurate_window():
    cfg = ts.SimConfig.commensurate(resolution=25e6, dt=1e-12, settle_time=30e-9)
    assert cfg.resolution == pytest.approx(25e6)
    assert cfg.window == pytest.approx(40e-9)


def test_resolution_and_settle_checks():
    d = ts.DriveConfig((ts.Tone(1, 30e9, -100.0),))
    with pytest.raises(ValueError, match="40 points"):
        ts.check_resolution(d, ts.SimConfig(dt=1e-12, t_end=100e-9, settle_time=50e-9))
    d = ts.DriveConfig((ts.Tone(1, 1e9, -100.0),))  # ramp 50 ns
    with pytest.raises(ValueError, match="ramp"):
        ts.check_resolution(d, ts.SimConfig(dt=1e-12, t_end=300e-9, settle_time=200e-9))
    ts.check_resolution(d, ts.SimConfig(dt=1e-12, t_end=300e-9, settle_time=250e-9))


def test_default_ramp_follows_strongest_tone():
    d = ts.DriveConfig((ts.Tone(1, 6e9, -110.0), ts.Tone(3, 8.45e9, -65.0)))
    assert d.effective_ramp == pytest.approx(50 / 8.45e9)


def test_transmission_phase_does_not_change_magnitude():
    net = lc_ladder(3)
    cfg = ts.SimConfig.commensurate(**FAST)
    mags = []
    for ph in (0.0, 1.0, 2.5):
        d = ts.DriveConfig((ts.Tone(1, 3e9, -100.0, ph),), ramp_time=1e-9)
        mags.append(abs(ts.transmission(ts.simulate_transient(net, d, cfg), 2, 1, 3e9)))
    assert np.ptp(mags) < 1e-9


def test_transmission_requires_drive():
    cfg = ts.SimConfig.commensurate(**FAST)
    res = ts.simulate_transient(lc_ladder(2), ts.DriveConfig((ts.Tone(1, 3e9, -100.0),), ramp_time=1e-9), cfg)
    with pytest.raises(ValueError):
        ts.transmission(res, 2, 1, 4e9)


def test_tone_on_missing_port():
    with pytest.raises(Exception):
        ts.simulate_transient(lc_ladder(2), ts.DriveConfig((ts.Tone(3, 3e9, -100.0),), ramp_time=1e-9), ts.SimConfig.commensurate(**FAST))


def test_p1db_interpolation_oracle():
    p = np.array([-120.0, -110.0, -100.0, -90.0])
    g = np.array([20.0, 19.8, 18.6, 15.0])
    r = ts.p1db_from_curve(p, g)
    # target 19.0 between -110 (19.8) and -100 (18.6)
    assert r.bracketed and r.p1db_dbm == pytest.approx(-110 + 10 * 0.8 / 1.2)


def test_p1db_flat_and_unbracketed():
    p = np.array([-120.0, -110.0, -100.0])
    flat = ts.p1db_from_curve(p, [20.0, 20.0, 19.5])
    assert flat.p1db_dbm is None and not flat.bracketed
    early = ts.p1db_from_curve(p, [18.0, 17.0, 16.0], small_signal_gain_db=20.0)
    assert early.p1db_dbm == -120.0 and not early.bracketed
    with pytest.raises(ValueError):
        ts.p1db_from_curve([1.0, 0.0], [1.0, 1.0])


def test_photon_flux_check():
    assert ts.photon_flux_check(10.0, 9.0) == 0.0
    assert ts.photon_flux_check(10.0, 8.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        ts.photon_flux_check(0.0, 1.0)


def test_timeseries_dump_roundtrip(tmp_path):
    cfg = ts.SimConfig.commensurate(**FAST, record_nodes=("n0",))
    res = ts.simulate_transient(lc_ladder(3), ts.DriveConfig((ts.Tone(1, 3e9, -90.0),), ramp_time=1e-9), cfg)
    p = tmp_path / "v.bin"
    ts.write_timeseries(res, p)
    t, v, names = ts.read_timeseries(p)
    assert names == res.nodes == ("a", "b", "n0")
    assert np.array_equal(v, res.voltages)
    assert np.allclose(t, res.time, rtol=0, atol=1e-21)
    assert p.read_bytes()[:8] == b"DTWPATS1"
    (tmp_path / "bad.bin").write_bytes(b"nope" * 10)
    with pytest.raises(ValueError):
        ts.read_timeseries(tmp_path / "bad.bin")


def test_unpumped_gain_point_is_lossless_transmission():
    net = lc_ladder(3)
    cfg = ts.SimConfig.commensurate(**FAST)
    pt = ts.measure_gain_point(net, ts.DriveConfig(ramp_time=1e-9), 3e9, -100.0, cfg)
    assert pt.f_idler is None
    assert pt.signal_flux_gain == pytest.approx(1.0, abs=5e-3)
    assert pt.gain_db == pytest.approx(20 * math.log10(abs(nport_sparams(net, [3e9]).s[0, 1, 0])), abs=0.02)


def test_single_tone_amplitude_within_tenth_percent():
    net = lc_ladder()
    cfg = ts.SimConfig.commensurate(resolution=100e6, dt=0.25e-12, settle_time=10e-9)
    d = ts.DriveConfig((ts.Tone(1, 3e9, -100.0),), ramp_time=2e-9)
    s21 = ts.transmission(ts.simulate_transient(net, d, cfg), 2, 1, 3e9)
    ref = nport_sparams(net, [3e9]).s[0, 1, 0]
    assert abs(abs(s21) / abs(ref) - 1) < 1e-3


def test_two_tone_extraction_is_orthogonal():
    dt, n = 1e-12, 20000
    t = np.arange(n) * dt
    x = 1.3 * np.cos(2 * np.pi * 2e9 * t) + 0.004 * np.cos(2 * np.pi * 7.5e9 * t - 1.0)
    assert ts.tone_amplitude(x, t, 2e9) == pytest.approx(1.3, rel=1e-10)
    assert ts.tone_amplitude(x, t, 7.5e9) == pytest.approx(0.004 * np.exp(-1j), rel=1e-10)
    # leakage into an empty grid bin stays far below -100 dBc
    assert 20 * np.log10(abs(ts.tone_amplitude(x, t, 5e9)) / 1.3) < -100


def test_weak_junction_drive_deviation_is_second_order():
    net = junction_pair()
    cfg = ts.SimConfig.commensurate(**FAST)
    ref = nport_sparams(net.linearized(), [6e9]).s[0, 1, 0]
    dev = []
    for p in (-90.0, -80.0):
        d = ts.DriveConfig((ts.Tone(1, 6e9, p),), ramp_time=1e-9)
        dev.append(abs(ts.transmission(ts.simulate_transient(net, d, cfg), 2, 1, 6e9) - ref))
    # 10 dB more drive raises the (I/Ic)^2 correction roughly tenfold
    assert dev[1] > 5 * dev[0]
