import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_spdc.dispersion import CrystalSpec, constant_index_model, fsr, omega_from_wavelength
from cavity_spdc.errors import DegenerateCavity, FilterOffGrid, OutOfRange, ResolutionTooCoarse
from cavity_spdc.spectral import (
    TWO_PI,
    CavitySpec,
    FilterSpec,
    FrequencyGrid,
    JSAGrid,
    PumpSpec,
    airy,
    apply_filter,
    build_jsa,
    central_cluster_grid,
    cluster_spectrum,
    double_pass_factor,
    double_resonance,
    finesse,
    linewidth,
    marginal,
    phase_matching,
    phase_matching_from_mismatch,
    pump_envelope,
    round_trip_phase,
)

from oracles import local_maxima

L = 4.2e-3
W0 = 2.4e15


def paper_cavity(**kw):
    return replace(CavitySpec(), **kw)


# ---------------------------------------------------------------- pump envelope


class TestPumpEnvelope:
    def test_gaussian_peak(self):
        p = PumpSpec(W0, "gaussian", 1e-9)
        assert pump_envelope(p, 0.5 * W0, 0.5 * W0) == 1.0

    def test_gaussian_fwhm(self):
        p = PumpSpec(W0, "gaussian", 1e-9)
        # amplitude halves at sigma_f sqrt(2 ln 2); intensity halves at sigma_f sqrt(ln 2)
        det = p.sigma_f * math.sqrt(2 * math.log(2))
        assert abs(pump_envelope(p, W0 + det, 0.0)) == pytest.approx(0.5, rel=1e-9)
        det = p.sigma_f * math.sqrt(math.log(2))
        assert abs(pump_envelope(p, W0 + det, 0.0)) ** 2 == pytest.approx(0.5, rel=1e-9)

    def test_square_first_zero(self):
        p = PumpSpec(W0, "square", 1e-9)
        # residue is the rounding of W0 + 2 pi / tau
        assert abs(pump_envelope(p, W0 + TWO_PI / p.tau, 0.0)) < 1e-9

    def test_square_has_negative_lobes(self):
        p = PumpSpec(W0, "square", 1e-9)
        assert pump_envelope(p, W0 + 3 * math.pi / p.tau, 0.0) < 0

    def test_sigma_convention(self):
        p = PumpSpec(W0, "gaussian", 0.3e-9)
        assert p.sigma_f == pytest.approx(2 * math.sqrt(math.log(2)) / 0.3e-9, rel=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(det=st.floats(-1e11, 1e11), shape=st.sampled_from(["gaussian", "square"]))
    def test_bounded(self, det, shape):
        p = PumpSpec(W0, shape, 0.5e-9)
        assert abs(pump_envelope(p, W0 + det, 0.0)) <= 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            PumpSpec(W0, "gaussian", 0.0)
        with pytest.raises(ValueError):
            PumpSpec(W0, "triangle", 1e-9)


# --------------------------------------------------------- phase matching, pump


class TestPhaseMatching:
    def test_zero_mismatch(self):
        assert phase_matching_from_mismatch(0.0, L) == 1 + 0j

    def test_sinc_zero(self):
        assert abs(phase_matching_from_mismatch(2 * math.pi / L, L)) < 1e-15

    def test_half_pi(self):
        assert abs(phase_matching_from_mismatch(math.pi / L, L)) == pytest.approx(2 / math.pi, rel=1e-14)

    def test_phase(self):
        dk = 0.8 / L
        assert np.angle(phase_matching_from_mismatch(dk, L)) == pytest.approx(0.4, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(x=st.floats(-1e5, 1e5))
    def test_bounded(self, x):
        assert abs(phase_matching_from_mismatch(x, L)) <= 1.0 + 1e-15

    def test_crystal_wrapper(self):
        cr = CrystalSpec(L, math.inf, 40.0, sellmeier=constant_index_model(1.8))
        out = phase_matching(cr, 1.2e15, 1.2e15)
        assert out == pytest.approx(1.0)


class TestDoublePass:
    def test_single_pass(self):
        cav = paper_cavity(pump_r=0.0)
        assert np.allclose(double_pass_factor(cav, np.linspace(-1e3, 1e3, 7), L), 1.0)

    def test_constructive(self):
        assert double_pass_factor(paper_cavity(pump_r=1.0), 0.0, L) == pytest.approx(2.0)

    def test_destructive(self):
        assert double_pass_factor(paper_cavity(pump_r=1.0, pump_phase=math.pi), 0.0, L) < 1e-7

    @settings(max_examples=50, deadline=None)
    @given(r=st.floats(0, 1), phi=st.floats(-7, 7), dk=st.floats(-1e4, 1e4))
    def test_range(self, r, phi, dk):
        v = double_pass_factor(paper_cavity(pump_r=r, pump_phase=phi), dk, L)
        assert abs(1 - r) - 1e-7 <= v <= 1 + r + 1e-12


# ----------------------------------------------------------- cavity figures


@pytest.fixture(scope="module")
def crystal():
    return CrystalSpec(L, 45.35e-6, 46.54)


class TestFinesse:
    def test_reference_device(self):
        assert finesse(CavitySpec(), "signal", L) == pytest.approx(128, abs=1)

    def test_no_cavity(self):
        assert finesse(CavitySpec.no_cavity(), "signal", L) == 0.0

    def test_monotone_in_loss(self):
        f = [finesse(paper_cavity(loss=a), "signal", L) for a in (0.0, 0.1, 1.0)]
        assert f[0] > f[1] > f[2]

    def test_degenerate(self):
        cav = paper_cavity(r1={"signal": 1.0, "idler": 1.0}, r2={"signal": 1.0, "idler": 1.0}, loss=0.0)
        with pytest.raises(DegenerateCavity):
            finesse(cav, "signal", L)


class TestAiry:
    def test_on_resonance(self, crystal):
        cav = CavitySpec()
        ws, _ = double_resonance(crystal, cav, 1540e-9, 1560e-9)
        assert airy(cav, crystal, "signal", ws) == pytest.approx(1.0, abs=1e-12)

    def test_anti_resonance(self, crystal):
        cav = CavitySpec()
        ws, _ = double_resonance(crystal, cav, 1540e-9, 1560e-9)
        w = ws + 0.5 * TWO_PI * fsr(crystal, "signal", 1540e-9)
        f = finesse(cav, "signal", L)
        # group index sets the spacing; allow for the tiny phase residue
        assert airy(cav, crystal, "signal", w) == pytest.approx(1 / (1 + 4 * f * f / math.pi**2), rel=1e-4)

    @pytest.mark.parametrize("r2", [0.9, 0.954, 0.98])
    def test_half_width(self, crystal, r2):
        cav = paper_cavity(r2={"signal": r2, "idler": r2})
        f = finesse(cav, "signal", L)
        assert f > 50
        ws, _ = double_resonance(crystal, cav, 1540e-9, 1560e-9)
        # oracle: delta solving 4F^2 sin^2(delta/2)/pi^2 = 1
        delta = 2 * math.asin(math.pi / (2 * f))
        assert abs(delta / (math.pi / f) - 1) < 0.01
        target_phase = float(round_trip_phase(crystal, cav, "signal", ws)) + math.pi / f
        # invert the local phase slope 2 n_g L / c to find the frequency
        from cavity_spdc.dispersion import C, group_index

        ng = group_index(crystal.sellmeier, "z", 1540e-9, crystal.temperature)
        w = ws + (target_phase - float(round_trip_phase(crystal, cav, "signal", ws))) * C / (2 * ng * L)
        assert airy(cav, crystal, "signal", w) == pytest.approx(0.5, rel=0.01)

    def test_range(self, crystal):
        w = 1.2e15 + np.linspace(0, 1e12, 1001)
        a = airy(CavitySpec(), crystal, "signal", w)
        assert np.all(a > 0) and np.all(a <= 1)

    def test_periodicity(self, crystal):
        cav = CavitySpec()
        ws, _ = double_resonance(crystal, cav, 1540e-9, 1560e-9)
        period = TWO_PI * fsr(crystal, "signal", 1540e-9)
        w = ws + np.linspace(-0.5, 0.5, 101) * period
        a0 = airy(cav, crystal, "signal", w)
        a1 = airy(cav, crystal, "signal", w + period)
        assert np.max(np.abs(a1 - a0) / np.maximum(a0, 1e-300)) < 1e-3


class TestLinewidth:
    def test_signal(self, crystal):
        assert linewidth(CavitySpec(), crystal, "signal", 1540e-9) / 1e6 == pytest.approx(150, rel=0.05)

    def test_idler(self, crystal):
        assert linewidth(CavitySpec(), crystal, "idler", 1560e-9) / 1e6 == pytest.approx(158, rel=0.05)

    def test_no_cavity_infinite(self, crystal):
        assert math.isinf(linewidth(CavitySpec.no_cavity(), crystal, "signal", 1540e-9))

    def test_equals_fsr_over_finesse(self, crystal):
        cav = CavitySpec()
        expected = fsr(crystal, "signal", 1540e-9) / finesse(cav, "signal", L)
        assert linewidth(cav, crystal, "signal", 1540e-9) == pytest.approx(expected, rel=1e-15)

    def test_doubled_finesse_halves_linewidth(self, crystal):
        # same FSR, reflectivities chosen to double F exactly
        cav = CavitySpec()
        f1 = finesse(cav, "signal", L)
        from scipy.optimize import brentq

        def gap(g):
            return math.pi * g**0.25 / (1 - math.sqrt(g)) - 2 * f1

        g = brentq(gap, 0.5, 1 - 1e-12)
        r = math.sqrt(g)  # symmetric mirrors, no loss
        cav2 = paper_cavity(r1={"signal": r, "idler": r}, r2={"signal": r, "idler": r}, loss=0.0)
        lw1 = linewidth(cav, crystal, "signal", 1540e-9)
        lw2 = linewidth(cav2, crystal, "signal", 1540e-9)
        assert lw2 == pytest.approx(lw1 / 2, rel=1e-9)


# ---------------------------------------------------------------------- build


def test_resolution_guard(paper):
    coarse = paper.with_grid(n=257).grid
    pump = paper.pump_for(1.1e-9)
    with pytest.raises(ResolutionTooCoarse):
        build_jsa(paper.crystal, paper.cavity, pump, coarse)


def test_guard_compliant_default_grid(paper):
    for fld, step, lam in (("signal", paper.grid.signal_step, 1540e-9),
                           ("idler", paper.grid.idler_step, 1560e-9)):
        lw = TWO_PI * linewidth(paper.cavity, paper.crystal, fld, lam)
        assert step <= lw / 8


def test_normalized(paper_smoke):
    sc = paper_smoke
    jsa = build_jsa(sc.crystal, sc.cavity, sc.pump_for(0.5e-9), sc.grid, relaxed_guard=True)
    assert jsa.normalized
    assert jsa.norm() == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.isfinite(jsa.amplitude))


def test_deterministic(paper_smoke):
    sc = paper_smoke
    a = build_jsa(sc.crystal, sc.cavity, sc.pump_for(0.5e-9), sc.grid, relaxed_guard=True)
    b = build_jsa(sc.crystal, sc.cavity, sc.pump_for(0.5e-9), sc.grid, relaxed_guard=True)
    assert np.array_equal(a.amplitude, b.amplitude)


def _peaks_2d(inten, rel=1e-3):
    """Local maxima of a 2-D array above ``rel`` of its max, strongest first."""
    core = inten[1:-1, 1:-1]
    mask = core > rel * inten.max()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                mask &= core >= inten[1 + di : inten.shape[0] - 1 + di, 1 + dj : inten.shape[1] - 1 + dj]
    idx = np.argwhere(mask) + 1
    order = np.argsort(-inten[idx[:, 0], idx[:, 1]])
    return idx[order]


def test_scenario_jsi_at_04ns(paper):
    sc = paper.with_grid(n=513, relaxed_guard=True)
    jsa = build_jsa(sc.crystal, sc.cavity, sc.pump_for(0.4e-9), sc.grid, relaxed_guard=True)
    inten = jsa.intensity
    peaks = _peaks_2d(inten)
    ws, wi = jsa.signal_axis, jsa.idler_axis
    # dominant peak on the central double resonance, within one grid step
    i, j = peaks[0]
    assert abs(ws[i] - sc.omega_s0) <= sc.grid.signal_step
    assert abs(wi[j] - sc.omega_i0) <= sc.grid.idler_step
    # the next two peaks sit on the anti-diagonal neighbours (+-1 FSR each)
    fs = TWO_PI * fsr(sc.crystal, "signal", 1540e-9)
    fi = TWO_PI * fsr(sc.crystal, "idler", 1560e-9)
    found = set()
    for i, j in peaks[1:3]:
        ds = round((ws[i] - sc.omega_s0) / fs)
        di = round((wi[j] - sc.omega_i0) / fi)
        found.add((ds, di))
        assert inten[i, j] < 0.5 * inten[peaks[0][0], peaks[0][1]]
    assert found == {(1, -1), (-1, 1)}


def test_no_cavity_ridge():
    cr = CrystalSpec(L, 45.35e-6, 46.54)
    cav = CavitySpec.no_cavity()
    ws0 = float(omega_from_wavelength(1540e-9))
    wi0 = float(omega_from_wavelength(1560e-9))
    span = TWO_PI * 60e9
    grid = FrequencyGrid(ws0, span, 201, wi0, span, 201)
    pump = PumpSpec(ws0 + wi0, "cw", cw_sigma=TWO_PI * 30e6)  # well below the 300 MHz step
    jsa = build_jsa(cr, cav, pump, grid)
    inten = jsa.intensity
    # all weight sits on the anti-diagonal (equal steps: i + j = n - 1)
    n = inten.shape[0]
    anti = inten[np.arange(n), n - 1 - np.arange(n)]
    assert anti.sum() / inten.sum() > 0.99
    # ridge is flat along its length (phase matching is broad on this scale)
    assert anti.min() / anti.max() > 0.9


def test_double_pass_doubles_central_amplitude(paper_smoke):
    sc = paper_smoke
    pump = sc.pump_for(1.1e-9)
    single = replace(sc.cavity, pump_r=0.0)
    a1 = build_jsa(sc.crystal, single, pump, sc.grid, relaxed_guard=True, normalize=False)
    a2 = build_jsa(sc.crystal, sc.cavity, pump, sc.grid, relaxed_guard=True, normalize=False)
    c = sc.grid.n_signal // 2
    ratio = abs(a2.amplitude[c, c]) / abs(a1.amplitude[c, c])
    from cavity_spdc.dispersion import wavevector_mismatch

    dk = wavevector_mismatch(sc.crystal, sc.omega_s0, sc.omega_i0)
    assert ratio == pytest.approx(math.sqrt(2 + 2 * math.cos(dk * L)), rel=1e-12)
    assert ratio == pytest.approx(2.0, rel=0.005)
    # pointwise: the whole grid scales by the double-pass factor
    live = np.abs(a1.amplitude) > 1e-200  # pump tails underflow far from the energy line
    ratio_grid = np.abs(a2.amplitude[live]) / np.abs(a1.amplitude[live])
    dk_grid = wavevector_mismatch(sc.crystal, a1.signal_axis[:, None], a1.idler_axis[None, :])
    assert np.allclose(ratio_grid, double_pass_factor(sc.cavity, dk_grid, L)[live], rtol=1e-12)


def test_limit_consistency_single_pass(paper_smoke):
    sc = paper_smoke
    pump = sc.pump_for(0.8e-9)
    jsa = build_jsa(sc.crystal, CavitySpec.no_cavity(), pump, sc.grid, relaxed_guard=True,
                    normalize=False)
    ws = jsa.signal_axis[:, None]
    wi = jsa.idler_axis[None, :]
    expected = pump_envelope(pump, ws, wi) * phase_matching(sc.crystal, ws, wi)
    rel = np.abs(jsa.amplitude - expected) / np.maximum(np.abs(expected), 1e-300)
    assert rel.max() < 1e-12


def test_hermitian_symmetry_dispersion_free():
    # constant but different indices; grating cancels the mismatch at the centre
    from cavity_spdc.dispersion import C

    model = constant_index_model(1.80, 1.85)
    cav = CavitySpec()
    free = CrystalSpec(L, math.inf, 46.54, sellmeier=model)
    ws0, wi0 = double_resonance(free, cav, 1540e-9, 1560e-9)
    cr = replace(free, poling_period=TWO_PI / ((1.85 - 1.80) * ws0 / C))
    grid = central_cluster_grid(cr, cav, ws0, wi0, n=201)
    pump = PumpSpec(ws0 + wi0, "gaussian", 0.6e-9)
    a = np.abs(build_jsa(cr, cav, pump, grid, relaxed_guard=True).amplitude)
    assert np.max(np.abs(a - a[::-1, ::-1])) < 1e-6 * a.max()


# ------------------------------------------------------------------- filters


def _filtered_pair(sc, fwhm):
    jsa = build_jsa(sc.crystal, sc.cavity, sc.pump_for(0.4e-9), sc.grid, relaxed_guard=True)
    flt = FilterSpec(center=sc.omega_i0, fwhm_hz=fwhm, shape="lorentzian", axis="idler")
    return jsa, apply_filter(jsa, [flt]), flt


def test_broad_filter_is_identity(paper_smoke):
    jsa, out, _ = _filtered_pair(paper_smoke, 1e15)
    assert np.max(np.abs(out.amplitude - jsa.amplitude)) < 1e-9 * np.abs(jsa.amplitude).max()
    assert out.norm() == pytest.approx(1.0, abs=1e-9)


def test_five_ghz_suppression(paper):
    sc = paper.with_grid(n=513, relaxed_guard=True)
    jsa, out, flt = _filtered_pair(sc, 5e9)
    wi = jsa.idler_axis
    fi = TWO_PI * fsr(sc.crystal, "idler", 1560e-9)
    c = int(np.argmin(np.abs(wi - sc.omega_i0)))
    k = int(np.argmin(np.abs(wi - (sc.omega_i0 + fi))))
    before = jsa.intensity[:, k] / jsa.intensity[:, c].sum()
    after = out.intensity[:, k] / out.intensity[:, c].sum()
    ratio = after.sum() / before.sum()
    df = (wi[k] - wi[c]) / TWO_PI
    assert ratio == pytest.approx(1 / (1 + (2 * df / 5e9) ** 2) / (1 / (1 + (2 * 0.0 / 5e9) ** 2)), rel=1e-3)
    assert ratio == pytest.approx(1 / (1 + (2 * 20.2 / 5) ** 2), rel=0.01)


def test_filter_off_grid(paper_smoke):
    jsa = build_jsa(paper_smoke.crystal, paper_smoke.cavity, paper_smoke.pump_for(1e-9),
                    paper_smoke.grid, relaxed_guard=True)
    flt = FilterSpec(center=paper_smoke.omega_i0 + TWO_PI * 1e12, fwhm_hz=5e9)
    with pytest.raises(FilterOffGrid):
        apply_filter(jsa, [flt])


def test_airy_filter_shape():
    flt = FilterSpec(center=0.0, fwhm_hz=5e9, shape="airy", fsr_hz=100e9)
    t = flt.intensity_transmission(np.array([0.0, TWO_PI * 2.5e9, TWO_PI * 100e9]))
    assert t[0] == pytest.approx(1.0)
    assert t[1] == pytest.approx(0.5, rel=0.01)
    assert t[2] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        FilterSpec(center=0.0, fwhm_hz=5e9, shape="airy")
    with pytest.raises(ValueError):
        FilterSpec(center=0.0, fwhm_hz=0.0)


# ------------------------------------------------------------------ marginals


def test_marginal_integrates_to_one(paper_smoke):
    sc = paper_smoke
    jsa = build_jsa(sc.crystal, sc.cavity, sc.pump_for(0.4e-9), sc.grid, relaxed_guard=True)
    for axis, step in (("signal", sc.grid.signal_step), ("idler", sc.grid.idler_step)):
        m = marginal(jsa, axis)
        assert np.all(m >= 0)
        assert m.sum() * step == pytest.approx(1.0, abs=1e-9)


def test_marginal_separable():
    grid = FrequencyGrid(0.0, 10.0, 41, 0.0, 8.0, 33)
    f = np.exp(-grid.signal_axis**2)
    g = np.exp(-((grid.idler_axis - 1) ** 2)) * np.exp(1j * grid.idler_axis)
    jsa = JSAGrid(np.outer(f, g), grid).normalize()
    m = marginal(jsa, "signal")
    expected = f**2 / (np.sum(f**2) * grid.signal_step)
    assert np.allclose(m, expected, rtol=1e-12)


def test_marginal_symmetric_swap():
    grid = FrequencyGrid(0.0, 10.0, 41, 0.0, 10.0, 41)
    x = grid.signal_axis
    amp = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2 + x[:, None] * x[None, :]))
    jsa = JSAGrid(amp, grid).normalize()
    assert np.allclose(marginal(jsa, "signal"), marginal(jsa, "idler"), rtol=1e-13)


def test_signal_marginal_three_peak_comb(paper):
    sc = paper.with_grid(n=513, relaxed_guard=True)
    jsa = build_jsa(sc.crystal, sc.cavity, sc.pump_for(0.4e-9), sc.grid, relaxed_guard=True)
    m = marginal(jsa, "signal")
    k = local_maxima(m, 1e-3 * m.max())
    assert k.size == 3
    spacing = np.diff(jsa.signal_axis[k]) / TWO_PI
    assert np.allclose(spacing, fsr(sc.crystal, "signal", 1540e-9), rtol=0.01)


# ------------------------------------------------------------ cluster spectrum


def _cluster_centres(spec, gap_hz=50e9, rel=0.02):
    y = spec.intensity
    k = local_maxima(y, rel * y.max())
    x = spec.idler_detuning_hz[k]
    groups, current = [], [0]
    for a in range(1, k.size):
        if abs(x[a] - x[a - 1]) > gap_hz:
            groups.append(current)
            current = []
        current.append(a)
    groups.append(current)
    centres = [float(np.average(x[g], weights=y[k[g]])) for g in groups]
    weights = [float(y[k[g]].sum()) for g in groups]
    return np.array(centres), np.array(weights)


def test_cluster_spacing_vernier(paper):
    cav = replace(paper.cavity, pump_r=0.0)
    spec = cluster_spectrum(paper.crystal, cav, paper.pump.center, paper.omega_s0, 1000e9)
    assert np.all(spec.intensity >= 0)
    centres, _ = _cluster_centres(spec)
    assert centres.size >= 3
    central = centres[np.argmin(np.abs(centres))]
    spacing = np.min(np.abs(np.delete(centres, np.argmin(np.abs(centres))) - central))
    fs = fsr(paper.crystal, "signal", 1540e-9)
    fi = fsr(paper.crystal, "idler", 1560e-9)
    vernier = fs * fi / abs(fs - fi)
    assert spacing == pytest.approx(vernier, rel=0.10)


def test_pump_phase_controls_side_clusters(paper):
    def side_ratio(phase):
        cav = replace(paper.cavity, pump_phase=phase)
        spec = cluster_spectrum(paper.crystal, cav, paper.pump.center, paper.omega_s0, 1000e9)
        x, y = spec.idler_detuning_hz, spec.intensity
        centre = y[np.abs(x) < 100e9].max()
        side = y[np.abs(x) > 300e9].max()
        return side / centre

    assert side_ratio(0.0) < 0.1 * side_ratio(math.pi)
    assert side_ratio(0.0) < 0.05


def test_equal_fsr_no_clustering():
    from cavity_spdc.scenario import bundled_scenario

    sc = bundled_scenario("equal_fsr")
    spec = cluster_spectrum(sc.crystal, sc.cavity, sc.pump.center, sc.omega_s0, 400e9)
    k = local_maxima(spec.intensity, 0.5 * spec.intensity.max())
    f = fsr(sc.crystal, "signal", 1540e-9)
    assert k.size >= int(400e9 / f) - 1
    heights = spec.intensity[k]
    assert heights.min() / heights.max() > 0.99
    assert np.allclose(np.diff(spec.signal_detuning_hz[k]), f, rtol=0.01)


def test_cluster_spectrum_out_of_range(paper):
    with pytest.raises(OutOfRange):
        cluster_spectrum(paper.crystal, paper.cavity, paper.pump.center, paper.omega_s0, 50e12)
