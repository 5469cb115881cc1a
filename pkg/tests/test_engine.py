import numpy as np
import pytest
from scipy.special import sici

from awp_lab.crystal import CrystalSpec
from awp_lab.elements import FourierLens, Propagate, ThinMask
from awp_lab.engine import (
    PerfectCavityError,
    Point,
    PolarizedPoint,
    PolarizedSetup,
    PureState,
    UnfoldedSetup,
    bucket_jpd,
    conditional_polarized,
    conditional_wavefunction,
    ensemble_intensity,
    nphoton_conditional,
    pairwise_sum,
    partially_coherent_jpd,
    undetected_ensemble,
)
from awp_lab.grid import Grid2D, GridMismatchError, ScalarField, gaussian_beam, impulse
from awp_lab.kernels import momentum_transfer, position_kernel
from awp_lab.oracle import aligned_relative_l2

N_O = 1.6551
LAM = 810e-9
L = 1e-3
THIN = CrystalSpec.thin(LAM / 2)
DEG = CrystalSpec.degenerate_type1(L, N_O, LAM / 2)


def test_thin_crystal_plane_pump_is_a_mirror():
    g = Grid2D.square(32, 4e-6)
    s = UnfoldedSetup([], position_kernel(THIN, g), [], g)
    x, y = g.position(9, 21)
    out = conditional_wavefunction(s, Point(x, y))
    assert np.allclose(out.amp, impulse(g, x, y, LAM).amp, rtol=0, atol=1e-9)


def test_bulk_kernel_gives_shifted_ssi_rings():
    g = Grid2D.square(64, 3e-6)
    s = UnfoldedSetup([], position_kernel(DEG, g), [], g)
    x1, y1 = g.position(36, 27)
    out = conditional_wavefunction(s, Point(x1, y1))
    X, Y = g.mesh()
    arg = N_O * (2 * np.pi / LAM) * ((X - x1) ** 2 + (Y - y1) ** 2) / (2 * L)
    ref = sici(arg)[0] - np.pi / 2
    assert aligned_relative_l2(ref, out.amp) < 1e-10


def test_fourier_lens_arms_give_tilted_plane_wave_with_sinc_envelope():
    n, dx, f = 128, 40e-6, 0.02
    det = Grid2D.square(n, dx)
    lens = FourierLens(f)
    crys = lens.output_grid(det, LAM)
    s = UnfoldedSetup([lens], position_kernel(DEG, crys, conv_mode="circular"), [], det)
    X, Y = crys.mesh()
    # central quarter: away from the window edge where the finite plane wave is cut off
    c = slice(3 * n // 8, 5 * n // 8)
    amps = {}
    for m in (0, 3, 6, 9):
        x1, y1 = det.position(n // 2 - m, n // 2 + 2 * m)
        out = conditional_wavefunction(s, Point(x1, y1)).amp
        ratio = (out / np.exp(-2j * np.pi * (x1 * X + y1 * Y) / (LAM * f)))[c, c]
        mid = ratio[n // 8, n // 8]
        assert np.max(np.abs(ratio - mid)) <= 2e-3 * abs(mid)
        q = 2 * np.pi * np.hypot(x1, y1) / (LAM * f)
        amps[m] = (abs(mid), abs(momentum_transfer(DEG, np.array([2 * q]))[0]))
    assert amps[9][1] < 0.2
    for m in (3, 6, 9):
        assert amps[m][0] / amps[0][0] == pytest.approx(amps[m][1], rel=2e-3)


# polarization ------------------------------------------------------------------------


def _pol_setup(chi, pump, g):
    k = position_kernel(THIN, g)
    channels = {key: k for key in chi}
    return PolarizedSetup([], chi, channels, pump, [], g, LAM)


def test_stacked_crystal_pair_passes_both_polarizations():
    g = Grid2D.square(16, 4e-6)
    d = 1 / np.sqrt(2)
    s = _pol_setup({("V", "H", "H"): 1.0, ("H", "V", "V"): 1.0}, {"H": d, "V": d}, g)
    x, y = g.position(8, 5)
    for jones in [(1, 0), (0, 1), (0.6, 0.8j), (np.exp(0.3j) * 0.8, -0.6)]:
        out = conditional_polarized(s, PolarizedPoint(x, y, jones))
        h, v = out.h.amp[8, 5], out.v.amp[8, 5]
        expect = np.conj(np.asarray(jones, complex))
        got = np.array([h, v]) / np.linalg.norm([h, v])
        assert abs(abs(np.vdot(expect, got)) - 1.0) < 1e-12
        assert np.linalg.norm([h, v]) == pytest.approx(d / g.cell_area, rel=1e-12)


def test_single_crystal_acts_as_polarizer():
    g = Grid2D.square(16, 4e-6)
    s = _pol_setup({("V", "H", "H"): 1.0}, {"H": 0.0, "V": 1.0}, g)
    x, y = g.position(4, 11)
    out = conditional_polarized(s, PolarizedPoint(x, y, (np.sqrt(0.3), np.sqrt(0.7))))
    assert np.all(out.v.amp == 0)
    assert abs(out.h.amp[4, 11]) == pytest.approx(np.sqrt(0.3) / g.cell_area, rel=1e-12)
    off = conditional_polarized(s, PolarizedPoint(x, y, (0, 1)))
    assert np.all(off.intensity() == 0)


def test_polarized_setup_requires_every_nonzero_channel():
    g = Grid2D.square(8, 4e-6)
    k = position_kernel(THIN, g)
    with pytest.raises(KeyError, match="chi_HVV"):
        PolarizedSetup([], {("V", "H", "H"): 1.0, ("H", "V", "V"): 0.5}, {("V", "H", "H"): k}, {"H": 1.0}, [], g, LAM)
    # zero entries need no kernel
    PolarizedSetup([], {("V", "H", "H"): 1.0, ("H", "V", "V"): 0.0}, {("V", "H", "H"): k}, {"V": 1.0}, [], g, LAM)
    with pytest.raises(ValueError):
        PolarizedPoint(0.0, 0.0, (1.0, 1.0))


# post-selection, buckets, ensembles -----------------------------------------------------


def _bulk_setup(n=32, dx=3e-6):
    g = Grid2D.square(n, dx)
    k = position_kernel(DEG, g, pump=40e-6)
    return UnfoldedSetup([Propagate(2e-4)], k, [Propagate(1e-4)], g), g


def test_pure_state_is_weighted_sum_of_points():
    s, g = _bulk_setup(16)
    rng = np.random.default_rng(3)
    psi = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    direct = conditional_wavefunction(s, PureState(ScalarField(g, psi, LAM))).amp
    acc = np.zeros(g.shape, complex)
    for iy in range(g.ny):
        for ix in range(g.nx):
            acc += np.conj(psi[iy, ix]) * g.cell_area * conditional_wavefunction(s, Point(*g.position(iy, ix))).amp
    assert np.linalg.norm(direct - acc) <= 1e-10 * np.linalg.norm(acc)


def test_pure_state_validation():
    s, g = _bulk_setup(8)
    with pytest.raises(ValueError):
        PureState(ScalarField(g, np.zeros(g.shape), LAM))
    with pytest.raises(GridMismatchError):
        conditional_wavefunction(s, PureState(gaussian_beam(Grid2D.square(8, 1e-6), LAM, 5e-6)))
    with pytest.raises(TypeError):
        conditional_wavefunction(s, (0.0, 0.0))


def test_bucket_single_pixel_and_incoherent_pair():
    s, g = _bulk_setup()
    p1, p2 = (10, 12), (20, 17)
    one, _ = bucket_jpd(s, [p1])
    a = np.abs(conditional_wavefunction(s, Point(*g.position(*p1))).amp) ** 2
    b = np.abs(conditional_wavefunction(s, Point(*g.position(*p2))).amp) ** 2
    assert np.allclose(one, a, rtol=1e-12, atol=0)
    two, _ = bucket_jpd(s, [p1, p2])
    assert np.allclose(two, a + b, rtol=1e-12, atol=1e-15 * a.max())
    mask = np.zeros(g.shape, bool)
    mask[p1] = mask[p2] = True
    assert np.allclose(bucket_jpd(s, mask)[0], two, rtol=1e-12)


def test_bucket_region_errors():
    s, g = _bulk_setup(8)
    with pytest.raises(ValueError):
        bucket_jpd(s, np.zeros(g.shape, bool))
    with pytest.raises(GridMismatchError):
        bucket_jpd(s, [(8, 0)])
    with pytest.raises(GridMismatchError):
        bucket_jpd(s, np.ones((4, 4), bool))


def test_bucket_is_independent_of_batch_size():
    s, g = _bulk_setup(16)
    region = [(i, j) for i in range(3, 12) for j in range(5, 9)]
    a = bucket_jpd(s, region, batch=64)[0]
    b = bucket_jpd(s, region, batch=5)[0]
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_undetected_absorber_weights():
    g = Grid2D.square(6, 4e-6)
    ones = undetected_ensemble(None, LAM, [(ThinMask(np.ones(g.shape)), "obj", g), (ThinMask(np.zeros(g.shape)), "dump", g)])
    w = {c.location: c.weight for c in ones.components}
    obj = [c.weight for c in ones.components if c.location == "obj"]
    dump = [c.weight for c in ones.components if c.location == "dump"]
    assert all(x == 0 for x in obj)
    assert all(x == pytest.approx(g.cell_area) for x in dump)
    assert set(w) == {"obj", "dump"}
    half = undetected_ensemble(None, LAM, [(ThinMask(np.full(g.shape, 0.6)), "obj", g)])
    assert all(c.weight == pytest.approx(0.64 * g.cell_area) for c in half.components)


def test_perfect_cavity_and_gain_rejected():
    g = Grid2D.square(4, 4e-6)
    with pytest.raises(PerfectCavityError):
        undetected_ensemble(None, LAM)
    with pytest.raises(PerfectCavityError):
        undetected_ensemble(None, LAM, [(ThinMask(np.ones(g.shape)), "obj", g)])
    with pytest.raises(ValueError, match="gain"):
        undetected_ensemble(g, LAM, [(ThinMask(np.full(g.shape, 1.5)), "obj", g)])
    with pytest.raises(ValueError, match="grid"):
        undetected_ensemble(g, LAM, [(ThinMask(np.ones(g.shape)), "obj")])


def test_exit_ensemble_equals_full_bucket():
    s, g = _bulk_setup(16)
    ens = undetected_ensemble(g, LAM)
    I, _ = ensemble_intensity(s, ens)
    B, _ = bucket_jpd(s, np.ones(g.shape, bool))
    assert np.allclose(I, B * g.cell_area, rtol=1e-12, atol=0)
    assert I.min() >= 0


def test_partially_coherent_sum():
    g = Grid2D.square(24, 3e-6)
    pumps = [gaussian_beam(g, LAM / 2, 20e-6, x0=dx0) for dx0 in (-10e-6, 0.0, 15e-6)]
    setups = [UnfoldedSetup([], position_kernel(DEG, g, pump=p), [Propagate(1e-4)], g) for p in pumps]
    ps = Point(*g.position(12, 13))
    single = partially_coherent_jpd([(1.0, setups[0])], ps)
    assert np.allclose(single.amp, np.abs(conditional_wavefunction(setups[0], ps).amp) ** 2, rtol=1e-14)
    w = [0.2, 0.5, 0.3]
    mix = partially_coherent_jpd(list(zip(w, setups)), ps)
    ref = sum(wi * np.abs(conditional_wavefunction(si, ps).amp) ** 2 for wi, si in zip(w, setups))
    assert np.allclose(mix.amp, ref, rtol=1e-12)
    assert mix.amp.min() >= 0
    with pytest.raises(ValueError):
        partially_coherent_jpd([], ps)
    with pytest.raises(ValueError):
        partially_coherent_jpd([(-1.0, setups[0])], ps)


def test_incoherent_point_pump_loses_momentum_correlation():
    n, dx, f = 16, 20e-6, 0.02
    g = Grid2D.square(n, dx)
    lens = FourierLens(f)
    det = lens.output_grid(g, LAM)
    modes = []
    for iy in range(n):
        for ix in range(n):
            pump = impulse(g, *g.position(iy, ix), LAM / 2)
            k = position_kernel(THIN, g, pump=pump)
            modes.append((g.cell_area, UnfoldedSetup([lens], k, [lens], det)))
    a = partially_coherent_jpd(modes, Point(*det.position(8, 8))).amp
    b = partially_coherent_jpd(modes, Point(*det.position(3, 12))).amp
    assert np.allclose(a, b, rtol=1e-10, atol=0)
    assert np.ptp(a) <= 1e-10 * a.max()


# N-photon ---------------------------------------------------------------------------------


def test_two_photon_case_reduces_to_conditional():
    g = Grid2D.square(64, 2e-6)
    pump = gaussian_beam(g, LAM / 2, 50e-6)
    x, y = g.position(30, 37)
    got = nphoton_conditional(g, [((x, y), 3e-4, LAM)], LAM, pump=pump, arm_out=[Propagate(2e-4)])
    s = UnfoldedSetup([Propagate(3e-4)], position_kernel(THIN, g, pump=pump), [Propagate(2e-4)], g)
    ref = conditional_wavefunction(s, Point(x, y))
    assert np.allclose(got.amp, ref.amp, rtol=0, atol=1e-12 * np.abs(ref.amp).max())
    with pytest.raises(ValueError):
        nphoton_conditional(g, [], LAM)


def _fitted_distance(field, k, rmax):
    g = field.grid
    row = field.amp[g.ny // 2]
    sel = np.abs(g.x) <= rmax
    phase = np.unwrap(np.angle(row[sel]))
    curv = np.polyfit(g.x[sel] ** 2, phase, 1)[0]
    return k / (2 * curv)


@pytest.mark.parametrize("lams,ds", [((LAM, LAM), (1e-3, 1e-3)), ((700e-9, 900e-9), (1e-3, 1.6e-3))])
def test_three_photon_spherical_wave(lams, ds):
    g = Grid2D.square(256, 2e-6)
    lam1 = 1.0 / (1.0 / (LAM / 3) - sum(1.0 / lj for lj in lams))
    k1 = 2 * np.pi / lam1
    out = nphoton_conditional(g, [((0.0, 0.0), d, lj) for d, lj in zip(ds, lams)], lam1)
    expect = k1 / sum(2 * np.pi / lj / d for d, lj in zip(ds, lams))
    assert _fitted_distance(out, k1, 80e-6) == pytest.approx(expect, rel=0.01)
    if lams[0] == lams[1] and ds[0] == ds[1]:
        assert lam1 == pytest.approx(LAM) and expect == pytest.approx(ds[0] / 2)


def test_pairwise_sum_fixed_order():
    rng = np.random.default_rng(0)
    xs = [rng.normal(size=3) for _ in range(7)]
    ref = (((xs[0] + xs[1]) + (xs[2] + xs[3])) + ((xs[4] + xs[5]) + xs[6]))
    assert np.array_equal(pairwise_sum(xs), ref)
    with pytest.raises(ValueError):
        pairwise_sum([])
