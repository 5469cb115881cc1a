import csv
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from awp_lab.hom import (
    HomConfig,
    Monochromatic,
    Pulsed,
    TemporalPacket,
    WindowClippingError,
    coincidence_probability,
    coincidence_scan,
    hom_amplitudes,
    nondegenerate_beat,
    pulsed_gate,
    rect_bandpass,
    write_scan_csv,
)

S = 30e-6
PK = TemporalPacket.gaussian(S, n=2048)


def test_zero_delay_amplitudes():
    a = hom_amplitudes(HomConfig(PK, 0.0), z1=5e-6)
    assert np.max(np.abs(a["lower"])) <= 1e-12
    assert np.allclose(a["upper"], 1j * PK.shifted(5e-6), atol=1e-12)


def test_large_delay_splits_into_half_amplitude_packets():
    d = 10 * S
    a = hom_amplitudes(HomConfig(PK, d))
    z = a["z"]
    right, left = z > 0, z < 0
    E = PK.energy
    for key in ("upper", "lower"):
        e_right = np.sum(np.abs(a[key][right]) ** 2) * PK.dz
        e_left = np.sum(np.abs(a[key][left]) ** 2) * PK.dz
        assert e_right == pytest.approx(E / 4, rel=1e-9)
        assert e_left == pytest.approx(E / 4, rel=1e-9)


@given(st.floats(0.0, 8 * S), st.floats(-5 * S, 5 * S))
def test_beam_splitter_conserves_energy(d, z1):
    a = hom_amplitudes(HomConfig(PK, d), z1)
    tot = (np.sum(np.abs(a["upper"]) ** 2) + np.sum(np.abs(a["lower"]) ** 2)) * PK.dz
    assert tot == pytest.approx(PK.energy, rel=1e-10)


@given(st.floats(0.0, 10 * S))
def test_probability_bounds_and_evenness(d):
    p = coincidence_scan(PK, [d, -d])
    assert 0.0 <= p[0] <= 0.5 + 1e-12
    assert p[0] == p[1]


def test_dip_limits():
    assert coincidence_probability(HomConfig(PK, 0.0)) <= 1e-10
    assert coincidence_probability(HomConfig(PK, 15 * S)) == pytest.approx(0.5, abs=1e-6)


def test_dip_of_non_gaussian_packet_against_quadrature():
    # a sech envelope: the overlap int f(z - d) f(z + d) dz by independent dense trapezoid
    w = 20e-6
    pk = TemporalPacket.from_function(lambda z: 1 / np.cosh(z / w), 60 * w, 4096)
    z = np.linspace(-60 * w, 60 * w, 400001)
    E = np.trapezoid(1 / np.cosh(z / w) ** 2, z)
    for d in (0.0, 0.5 * w, 2 * w, 5 * w):
        O = np.trapezoid(1 / np.cosh((z - d) / w) / np.cosh((z + d) / w), z)
        assert coincidence_probability(HomConfig(pk, d)) == pytest.approx(0.5 * (1 - O / E), abs=1e-6)


def test_window_clipping_detected():
    small = TemporalPacket.gaussian(S, half_width=10 * S, n=512)
    with pytest.raises(WindowClippingError):
        coincidence_probability(HomConfig(small, 6 * S))
    with pytest.raises(WindowClippingError):
        hom_amplitudes(HomConfig(small, 0.0), z1=9 * S)


def test_packet_validation():
    z = np.linspace(-1, 1, 8)
    with pytest.raises(ValueError, match="even"):
        TemporalPacket(z, np.exp(-((z - 0.2) ** 2)))
    with pytest.raises(ValueError):
        TemporalPacket(z, np.zeros(8))
    with pytest.raises(ValueError):
        TemporalPacket(np.linspace(0, 1, 8), np.ones(8))
    with pytest.raises(ValueError):
        TemporalPacket(z ** 3, np.ones(8))
    with pytest.raises(ValueError):
        TemporalPacket.from_function(np.cos, 1.0, 7)
    with pytest.raises(ValueError):
        HomConfig(PK, -1e-6)


# pump gating ------------------------------------------------------------------------------


def test_monochromatic_pump_leaves_amplitudes():
    cfg = HomConfig(PK, 3 * S, Monochromatic())
    a, b = hom_amplitudes(cfg), pulsed_gate(cfg, offset=0.0)
    assert np.array_equal(a["upper"], b["upper"]) and np.array_equal(a["lower"], b["lower"])


def _box(half):
    return lambda z: (np.abs(z) <= half).astype(float)


def test_disjoint_pump_gives_nothing():
    d = 8 * S
    out = pulsed_gate(HomConfig(PK, d, Pulsed(_box(S))), offset=30 * S)
    assert np.max(np.abs(out["upper"])) <= 1e-12 * np.abs(PK.f).max()
    assert np.max(np.abs(out["lower"])) <= 1e-12 * np.abs(PK.f).max()


def test_pump_over_one_component_localizes_partner():
    d = 8 * S
    cfg = HomConfig(PK, d, Pulsed(_box(3 * S)))
    free = hom_amplitudes(cfg)
    out = pulsed_gate(cfg, offset=d)
    z = out["z"]
    near = np.abs(z - d) <= 3 * S
    # inside the pump window only the component centred at +d survives, outside nothing
    assert np.max(np.abs(out["upper"][~near])) == 0
    assert np.allclose(out["upper"][near], free["upper"][near], atol=1e-12)
    assert np.allclose(out["upper"][near], 0.5j * PK.shifted(d)[near], atol=1e-8)


# nondegenerate beat ------------------------------------------------------------------------


def test_equal_carriers_reduce_to_dip():
    ds = np.linspace(0, 4 * S, 21)
    assert np.allclose(nondegenerate_beat(PK, ds, 7e6, 7e6), coincidence_scan(PK, ds), rtol=0, atol=1e-15)


def test_beat_against_closed_gaussian_form():
    # for exp(-z^2/2s^2) the overlap is E exp(-d^2/s^2)
    k_s, k_i = 7.757e6, 7.4e6
    ds = np.linspace(0, 4 * S, 301)
    ref = 0.5 * (1 - np.cos((k_s - k_i) * ds) * np.exp(-ds**2 / S**2))
    assert np.max(np.abs(nondegenerate_beat(PK, ds, k_s, k_i) - ref)) <= 1e-6


def test_beat_envelope_bounded_by_dip():
    ds = np.linspace(0, 5 * S, 401)
    P = nondegenerate_beat(PK, ds, 7.757e6, 7.4e6)
    dip = coincidence_scan(PK, ds)
    assert np.all(P >= dip - 1e-12)
    assert np.all(P <= 1 - dip + 1e-12)


# band-pass and output ---------------------------------------------------------------------------


@given(st.floats(-2e6, 2e6), st.floats(1e4, 1e6))
def test_rect_bandpass_is_idempotent(kc, bw):
    rng = np.random.default_rng(4)
    f = rng.normal(size=512) + 1j * rng.normal(size=512)
    once = rect_bandpass(f, 1e-6, kc, bw)
    assert np.allclose(rect_bandpass(once, 1e-6, kc, bw), once, atol=1e-12)


def test_write_scan_csv_roundtrip(tmp_path):
    ds = np.linspace(0, 1e-4, 5)
    P = coincidence_scan(PK, ds)
    path = tmp_path / "scan.csv"
    write_scan_csv(path, ds, P)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["d_m", "P"]
    back = np.array(rows[1:], dtype=float)
    assert np.array_equal(back[:, 0], ds) and np.array_equal(back[:, 1], P)
    assert [p for p in os.listdir(tmp_path) if p.endswith(".tmp")] == []
