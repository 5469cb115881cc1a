import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import sici

from awp_lab.crystal import CrystalSpec
from awp_lab.grid import Grid2D, gaussian_beam
from awp_lab.kernels import SsiCorr, position_kernel
from awp_lab.oracle import (
    MAX_NODES,
    MAX_TRANSVERSE,
    OracleWindowError,
    VolumeQuadrature,
    align,
    aligned_relative_l2,
    backward_suppression,
    direct_integral,
    mismatch_integral,
    reduced_z_integral,
)

N_O = 1.6551
LAM = 810e-9
L = 200 * LAM
DEG = CrystalSpec.degenerate_type1(L, N_O, LAM / 2)


def ssi_ref(x):
    return sici(x)[0] - np.pi / 2


# quadrature --------------------------------------------------------------------------


@pytest.mark.parametrize("contour", ["arc", "real"])
def test_nodes_pair_symmetrically_and_integrate_constants(contour):
    q = VolumeQuadrature(L, 32, contour)
    z, w = q.nodes_weights()
    assert np.min(np.abs(z)) > 0
    # every z has a mirror partner -conj(z)
    assert np.allclose(np.sort_complex(z), np.sort_complex(-np.conj(z)), rtol=0, atol=1e-15 * L)
    assert np.sum(w) == pytest.approx(L, rel=1e-13)
    # 1/z: principal value 0 on the segment, -i pi along the upper arc (pi -> 0)
    assert np.sum(w / z) == pytest.approx(-1j * np.pi if contour == "arc" else 0.0, abs=1e-12)
    assert q.doubled().n_nodes == 64


def test_quadrature_validation():
    with pytest.raises(ValueError, match="even"):
        VolumeQuadrature(L, 33)
    with pytest.raises(ValueError):
        VolumeQuadrature(L, MAX_NODES + 2)
    with pytest.raises(ValueError):
        VolumeQuadrature(-L)
    with pytest.raises(ValueError):
        VolumeQuadrature(L, contour="spiral")
    with pytest.raises(ValueError):
        VolumeQuadrature(L, grid=Grid2D.square(MAX_TRANSVERSE + 2, 1e-6))


# reduced depth integral ----------------------------------------------------------------


@given(st.floats(1e-4, 1e3))
def test_reduced_integral_is_twice_i_ssi(x):
    Lz = 1e-3
    a = x * Lz / 2
    v = reduced_z_integral(a, Lz)
    assert v.real == 0.0
    assert abs(v - 2j * ssi_ref(x)) <= 1e-9 * max(1.0, abs(ssi_ref(x)))


def test_reduced_integral_limits_and_errors():
    assert abs(reduced_z_integral(1e6, 1e-3)) < 1e-8
    with pytest.raises(ValueError):
        reduced_z_integral(0.0, 1e-3)
    with pytest.raises(ValueError):
        reduced_z_integral(1.0, 0.0)


# direct integral ----------------------------------------------------------------------


def _row(n=9, half=6e-6):
    return np.c_[np.linspace(-half, half, n), np.linspace(-0.3 * half, 0.5 * half, n)]


def test_swap_symmetry_for_degenerate_source():
    pts = _row()
    psi = direct_integral(DEG, pts, pts, quad=VolumeQuadrature(L, 64))
    assert np.max(np.abs(psi - psi.T)) <= 1e-12 * np.max(np.abs(psi))


@pytest.mark.parametrize("waist,dx", [(5e-6, 0.4e-6), (8e-6, 0.6e-6)])
def test_analytic_and_numeric_routes_agree(waist, dx):
    pts = _row(7)
    r1 = [(0.0, 0.0), (1e-6, -0.5e-6)]
    a = direct_integral(DEG, r1, pts, pump=waist, quad=VolumeQuadrature(L, 64))
    q = VolumeQuadrature(L, 64, "arc", Grid2D.square(128, dx))
    b = direct_integral(DEG, r1, pts, pump=waist, quad=q, route="numeric")
    assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(a)


def test_sampled_pump_matches_gaussian_pump_on_real_contour():
    # same transverse discretization for both; only the pump handling differs
    g = Grid2D.square(128, 0.5e-6)
    pts = _row(5, 3e-6)
    r1 = [(0.0, 0.0)]
    q = VolumeQuadrature(L, 32, "real", g)
    a = direct_integral(DEG, r1, pts, pump=5e-6, quad=q, route="numeric", check_window=False)
    b = direct_integral(DEG, r1, pts, pump=gaussian_beam(g, LAM / 2, 5e-6), quad=q, route="numeric",
                        check_window=False)
    assert aligned_relative_l2(a, b) < 1e-3


def test_doubling_nodes_changes_little():
    pts = _row(11)
    q = VolumeQuadrature(L, 128)
    a = direct_integral(DEG, [(0.0, 0.0)], pts, quad=q)
    b = direct_integral(DEG, [(0.0, 0.0)], pts, quad=q.doubled())
    assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-3


def test_contraction_before_depth_sum_is_linear():
    pts = _row(6)
    r1 = _row(4, 2e-6)
    w = np.array([0.3, -1.0j, 2.0, 0.5 + 0.5j])
    full = direct_integral(DEG, r1, pts, quad=VolumeQuadrature(L, 64))
    contracted = direct_integral(DEG, r1, pts, quad=VolumeQuadrature(L, 64), rho1_weights=w)
    assert contracted.shape == (1, 6)
    assert np.linalg.norm(contracted[0] - w @ full) <= 1e-8 * np.linalg.norm(w @ full)


@pytest.mark.parametrize("which", ["deg", "nondeg"])
def test_oracle_matches_kernel_in_central_region(which):
    c = DEG if which == "deg" else CrystalSpec.nondegenerate_type1(200 * LAM, N_O, 810e-9, 1550e-9)
    corr = position_kernel(c, Grid2D.square(4, 1e-6)).corr
    width = SsiCorr(corr.coef).fwhm
    g = Grid2D.square(48, 8 * width / 48)
    X, Y = g.mesh()
    m = np.hypot(X, Y).ravel() <= 3 * width
    pts = np.c_[X.ravel(), Y.ravel()][m]
    psi = direct_integral(c, [(0.0, 0.0)], pts)[0]
    ref = corr.evaluate(pts[:, 0], pts[:, 1])
    assert aligned_relative_l2(ref, psi) <= 0.02


def test_direct_integral_errors():
    pts = _row(3)
    with pytest.raises(ValueError, match="thin"):
        direct_integral(CrystalSpec.thin(405e-9), pts, pts)
    with pytest.raises(ValueError, match="thickness"):
        direct_integral(DEG, pts, pts, quad=VolumeQuadrature(2 * L))
    with pytest.raises(ValueError, match="route"):
        direct_integral(DEG, pts, pts, route="magic")
    with pytest.raises(ValueError, match="grid"):
        direct_integral(DEG, pts, pts, route="numeric")
    g = Grid2D.square(16, 1e-6)
    with pytest.raises(ValueError, match="real"):
        direct_integral(DEG, pts, pts, pump=gaussian_beam(g, LAM / 2, 5e-6), quad=VolumeQuadrature(L, 8, "arc", g),
                        route="numeric")
    with pytest.raises(ValueError, match="weight"):
        direct_integral(DEG, pts, pts, rho1_weights=[1.0])
    with pytest.raises(ValueError):
        direct_integral(DEG, pts, pts, pump=-1e-6)
    with pytest.raises(TypeError):
        direct_integral(DEG, pts, pts, pump=[1, 2])
    with pytest.raises(ValueError, match="pairs"):
        direct_integral(DEG, [1.0, 2.0, 3.0], pts)


def test_window_diagnostics():
    pts = _row(3)
    # plane pump on a finite window never decays at the edge
    with pytest.raises(OracleWindowError, match="edge"):
        direct_integral(DEG, pts, pts, quad=VolumeQuadrature(L, 8, "arc", Grid2D.square(64, 0.5e-6)), route="numeric")
    # near z = 0 on the real segment the chirp outruns any practical pitch
    with pytest.raises(OracleWindowError, match="aliases"):
        direct_integral(DEG, pts, pts, pump=5e-6, quad=VolumeQuadrature(L, 64, "real", Grid2D.square(128, 0.5e-6)),
                        route="numeric")
    with pytest.raises(OracleWindowError, match="aliases"):
        direct_integral(DEG, pts, pts, pump=5e-6, quad=VolumeQuadrature(L, 64, "arc", Grid2D.square(32, 2e-6)),
                        route="numeric")


# backward emission and mismatch -------------------------------------------------------


def test_mismatch_integral_closed_form():
    Lz = 1e-3
    for d in (0.0, 1e3, 2.2e4):
        expect = Lz if d == 0 else np.sin(d * Lz) / d
        assert mismatch_integral(d, Lz).real == pytest.approx(expect, rel=1e-10, abs=1e-16)
    # first zero where the accumulated mismatch d L reaches pi
    assert abs(mismatch_integral(np.pi / Lz, Lz)) < 1e-14


def test_backward_suppression():
    thin = CrystalSpec.degenerate_type1(10 * LAM, N_O, LAM / 2)
    assert backward_suppression(thin) < 0.1
    nk = N_O * 2 * np.pi / LAM
    assert backward_suppression(CrystalSpec.degenerate_type1(1e-3 * LAM, N_O, LAM / 2)) == pytest.approx(1.0, abs=1e-4)
    Ls = LAM * np.array([0.3, 1.0, 3.3, 10.0, 33.0, 100.0])
    ratios = np.array([backward_suppression(CrystalSpec.degenerate_type1(x, N_O, LAM / 2)) for x in Ls])
    assert np.allclose(ratios, np.abs(np.sin(nk * Ls) / (nk * Ls)), rtol=1e-8, atol=1e-12)
    # bounded by an envelope that falls as 1/L
    assert np.all(ratios <= 1 / (nk * Ls) + 1e-12)
    assert backward_suppression(thin, z_offset=0.37) == pytest.approx(backward_suppression(thin), rel=1e-12)
    with pytest.raises(ValueError):
        backward_suppression(CrystalSpec.beamlike_type2(L, N_O, 1.5425, 0.7, LAM / 2))


# alignment ---------------------------------------------------------------------------


def test_align_recovers_complex_scale(rng):
    a = rng.normal(size=50) + 1j * rng.normal(size=50)
    s = 0.3 - 2.1j
    assert align(a, s * a) == pytest.approx(1 / s, rel=1e-13)
    assert aligned_relative_l2(a, s * a) < 1e-14
    with pytest.raises(ValueError):
        align(a, np.zeros(50))
