import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmbloch import blochwave as bw
from bohmbloch import scenarios as sc
from bohmbloch.crystal import electron_kinematics

from conftest import fd5, random_points


def two_beam_closed_form(U, s, k0, z):
    """|phi_g|^2 for the 2x2 problem [[0, U], [U, 2 k0 s]]."""
    w2 = U**2 + (k0 * s) ** 2
    return U**2 / w2 * np.sin(np.pi * z * math.sqrt(w2) / k0) ** 2


def test_tilted_incident(kin200):
    k = bw.tilted_incident(kin200, (0.1, -0.2))
    assert np.linalg.norm(k) == pytest.approx(kin200.k0, rel=1e-14)
    with pytest.raises(ValueError):
        bw.tilted_incident(kin200, (kin200.k0, 0.0))


def test_excitation_error_sign(kin200):
    k = bw.tilted_incident(kin200)
    assert bw.excitation_error(k, [0.5, 0, 0]) < 0
    g = np.array([0.5, 0, 0])
    kb = bw.tilted_incident(kin200, -g[:2] / 2)
    assert bw.excitation_error(kb, g) == pytest.approx(0.0, abs=1e-14)
    # reciprocal point inside the Ewald sphere
    assert bw.excitation_error(k, [0.1, 0, -0.01]) > 0


def test_row_mode_candidates(cu, kin200):
    cand = bw.generate_beams(cu, kin200, row=(1, 0, 0), n_max=3)
    assert len(cand.beams) == 7
    assert cand.beams[0].hkl == (0, 0, 0)
    assert {b.hkl for b in cand.beams} == {(n, 0, 0) for n in range(-3, 4)}
    assert sum(b.tag == bw.ELIMINATED for b in cand.beams) == 4


def test_zone_mode_candidates(cu, kin200):
    g_max = 1.8
    cand = bw.generate_beams(cu, kin200, bw.Orientation(), g_max)
    assert cand.beams[0].is_origin
    for b in cand.beams:
        assert b.hkl[2] == 0
        assert np.linalg.norm(b.g) <= g_max + 1e-12
    # brute-force count of allowed ZOLZ reflections
    n = 0
    for h in range(-8, 9):
        for k in range(-8, 9):
            if h * h + k * k <= (g_max * cu.lattice_constant) ** 2:
                n += 1
    assert len(cand.beams) == n
    with pytest.raises(ValueError):
        bw.generate_beams(cu, kin200, g_max=-1.0)


def test_small_cutoff_gives_origin_only(cu, kin200):
    cand = bw.generate_beams(cu, kin200, g_max=0.1)
    assert [b.hkl for b in cand.beams] == [(0, 0, 0)]


def test_partition_rules(zone200):
    beams, _ = zone200
    assert beams.beams[0].tag == bw.STRONG
    lam = beams.kin.wavelength
    for b in beams.beams[1:]:
        if b.U == 0:
            assert b.tag == bw.ELIMINATED
            continue
        ratio = abs(b.s) / (lam * abs(b.U))
        expected = bw.STRONG if ratio <= 80 else bw.WEAK if ratio <= 90 else bw.ELIMINATED
        assert b.tag == expected
    with pytest.raises(ValueError):
        bw.partition_bethe(beams, 90, 80)


def test_matrix_hermitian_and_diagonal(zone200):
    beams, _ = zone200
    A = bw.assemble_dynamical_matrix(beams)
    np.testing.assert_allclose(A, A.conj().T, atol=1e-14)
    k0 = beams.kin.k0
    np.testing.assert_allclose(np.diag(A).real, [2 * k0 * b.s for b in beams.strong], atol=1e-12)


def test_bethe_correction_formula(cu, kin200):
    cand = bw.generate_beams(cu, kin200, row=(2, 0, 0), n_max=2)
    tags = {(0, 0, 0): bw.STRONG, (2, 0, 0): bw.STRONG, (-2, 0, 0): bw.STRONG,
            (4, 0, 0): bw.WEAK, (-4, 0, 0): bw.ELIMINATED}
    bs = replace(cand, beams=tuple(replace(b, tag=tags[b.hkl]) for b in cand.beams))
    A = bw.assemble_dynamical_matrix(bs)
    k0 = kin200.k0
    w = next(b for b in bs.beams if b.hkl == (4, 0, 0))
    strong = bs.strong

    def U(d):
        return bs.U(tuple(d))

    for i, g in enumerate(strong):
        for j, h in enumerate(strong):
            base = 2 * k0 * g.s if i == j else U(np.subtract(g.hkl, h.hkl))
            corr = U(np.subtract(g.hkl, w.hkl)) * U(np.subtract(w.hkl, h.hkl)) / (2 * k0 * w.s)
            assert A[i, j] == pytest.approx(base - corr, rel=1e-12, abs=1e-15)


def test_bethe_floor(cu, kin200):
    cand = bw.generate_beams(cu, kin200, row=(2, 0, 0), n_max=1)
    beams = list(cand.beams)
    beams[1] = replace(beams[1], tag=bw.WEAK, s=1e-12)
    beams[0] = replace(beams[0], tag=bw.STRONG)
    beams[2] = replace(beams[2], tag=bw.STRONG)
    with pytest.raises(bw.BetheError):
        bw.assemble_dynamical_matrix(replace(cand, beams=tuple(beams)))


def test_bethe_beats_truncation(cu):
    kin = electron_kinematics(200.0, False)
    cand = bw.generate_beams(cu, kin, bw.Orientation(), 1.8)
    part = bw.partition_bethe(cand, 80, 90)
    assert len(part.weak) > 0
    full = bw.mark_all_strong(cand)
    dropped = replace(part, beams=tuple(replace(b, tag=bw.ELIMINATED) if b.tag == bw.WEAK else b
                                        for b in part.beams))
    solve = lambda b: bw.solve_bloch(bw.assemble_dynamical_matrix(b), b)
    s_full, s_bethe, s_drop = solve(full), solve(part), solve(dropped)
    assert bw.delta_I(s_full, s_bethe, 500.0) < bw.delta_I(s_full, s_drop, 500.0)


def test_delta_I_identity_and_errors(zone200, bragg200):
    _, sol = zone200
    assert bw.delta_I(sol, sol, 500.0) == 0.0
    with pytest.raises(ValueError):
        bw.delta_I(sol, sol, 0.0)
    with pytest.raises(ValueError):
        bw.delta_I(bragg200[1], sol, 100.0)


def test_solution_structure(all_solutions):
    for sol in all_solutions.values():
        C = sol.C
        np.testing.assert_allclose(C.conj().T @ C, np.eye(len(C)), atol=1e-12)
        assert np.all(np.diff(sol.gammas) <= 0)
        assert not sol.gammas.flags.writeable
        # entrance condition: phi_g(0) = delta_g0
        amp0 = sol.amplitudes(0.0)[0]
        np.testing.assert_allclose(amp0, np.eye(len(C))[0], atol=1e-12)


def test_non_hermitian_rejected(bragg200):
    beams, _ = bragg200
    with pytest.raises(ValueError):
        bw.solve_bloch(np.array([[0.0, 1.0], [0.0, 0.0]]), beams)


@pytest.mark.parametrize("at_bragg", [True, False])
def test_two_beam_closed_form(cu, at_bragg):
    beams, sol = sc.two_beam_setup(cu, (2, 0, 0), 200.0, at_bragg=at_bragg)
    g = beams.beams[1]
    z = np.linspace(0, 1000, 401)
    I = bw.beam_intensities(sol, z)
    expected = two_beam_closed_form(g.U.real, g.s, beams.kin.k0, z)
    np.testing.assert_allclose(I[:, 1], expected, atol=1e-10)
    np.testing.assert_allclose(I.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2000))
def test_conservation_property(zone200, z):
    _, sol = zone200
    assert bw.beam_intensities(sol, z).sum() == pytest.approx(1.0, abs=1e-9)


def test_negative_depth_rejected(bragg200):
    with pytest.raises(ValueError):
        bw.beam_intensities(bragg200[1], -1.0)


def test_extinction_distance(bragg200):
    beams, _ = bragg200
    g = beams.beams[1]
    xi = bw.extinction_distance(g.U, beams.incident_k, g.g)
    assert xi == pytest.approx(beams.incident_k[2] / abs(g.U), rel=1e-12)
    assert bw.extinction_distance(0, beams.incident_k, g.g) == math.inf


@pytest.mark.parametrize("name", ["zone_axis_200", "two_beam", "systematic_row"])
def test_wave_derivatives_match_fd(all_solutions, cu, name):
    sol = all_solutions[name]
    rng = np.random.default_rng(3)
    # the carrier makes d/dz ~ 2 pi k0 ~ 250/A; h = 1e-4 keeps the stencil error ~1e-8
    h = 1e-4
    for r in random_points(rng, cu, 10):
        ws = bw.wave_at(sol, r, 2)
        psi = lambda p: bw.wave_at(sol, p, 0).psi
        grad = lambda p: bw.wave_at(sol, p, 1).grad
        g_fd = np.array([fd5(psi, r, i, h) for i in range(3)])
        assert np.linalg.norm(ws.grad - g_fd) <= 1e-6 * np.linalg.norm(ws.grad)
        H_fd = np.array([fd5(grad, r, i, h) for i in range(3)]).T
        assert np.linalg.norm(ws.hess - H_fd) <= 1e-6 * np.linalg.norm(ws.hess)


def test_wave_periodic_envelope(zone200, cu):
    _, sol = zone200
    rng = np.random.default_rng(4)
    r = random_points(rng, cu, 20)
    a = cu.lattice_constant
    p0 = sol.envelope(r, 0)[0]
    for shift in ([a, 0, 0], [0, a, 0], [a, -2 * a, 0]):
        np.testing.assert_allclose(sol.envelope(r + np.array(shift), 0)[0], p0, atol=1e-11)


def test_envelope_fast_path_consistent(zone200, cu):
    _, sol = zone200
    rng = np.random.default_rng(5)
    r = random_points(rng, cu, 8)
    r[:, 2] = 123.4
    fast = sol.envelope(r, 2)
    slow = [sol.envelope(p[None, :], 2) for p in r]
    for k in range(3):
        np.testing.assert_allclose(fast[k], np.concatenate([s[k] for s in slow]), rtol=1e-12, atol=1e-12)


def test_vacuum_plane_wave(vacuum, cu):
    beams, sol = vacuum
    assert len(sol.hkls) == 1
    rng = np.random.default_rng(6)
    r = random_points(rng, cu, 50)
    ws = bw.wave_at(sol, r, 1)
    np.testing.assert_allclose(np.abs(ws.psi), 1.0, atol=1e-12)
    expected = np.exp(2j * np.pi * r @ beams.incident_k)
    np.testing.assert_allclose(ws.psi, expected, atol=1e-9)


def test_beam_count_scan(cu):
    kin = electron_kinematics(200.0, False)
    rows = bw.scan_beam_counts(cu, kin, 80, 90, [0.5, 1.0, 1.8])
    assert [r.g_max for r in rows] == [0.5, 1.0, 1.8]
    assert all(a.n_strong <= b.n_strong for a, b in zip(rows, rows[1:]))
    exact, near = bw.match_beam_counts(rows, 29, 8)
    assert [r.g_max for r in exact] == [1.8]
    assert near.g_max == 1.8


def test_cutoff_just_above_200(cu, kin200):
    cand = bw.generate_beams(cu, kin200, g_max=0.56)
    allowed = {b.hkl for b in cand.beams if b.tag != bw.ELIMINATED}
    assert allowed == {(0, 0, 0), (2, 0, 0), (-2, 0, 0), (0, 2, 0), (0, -2, 0)}
    assert {(1, 0, 0), (1, 1, 0), (-1, 1, 0)} <= {b.hkl for b in cand.beams if b.tag == bw.ELIMINATED}


def test_normal_incidence_excitation_error(kin200):
    k = bw.tilted_incident(kin200)
    g = np.array([0.5533, 0, 0])
    assert bw.excitation_error(k, g) == pytest.approx(-(g @ g) / (2 * kin200.k0), rel=1e-14)
    assert bw.excitation_error(k, -g) == bw.excitation_error(k, g)


def test_partition_examples(cu, kin200):
    cand = bw.generate_beams(cu, kin200, row=(2, 0, 0), n_max=1)
    lam = kin200.wavelength
    b = cand.beams[1]
    mid = replace(b, s=85.0 * lam * abs(b.U))
    bragg = replace(b, s=0.0)
    part = bw.partition_bethe(replace(cand, beams=(cand.beams[0], mid, bragg)), 80, 90)
    assert [x.tag for x in part.beams] == [bw.STRONG, bw.WEAK, bw.STRONG]
    z, _ = sc.zone_axis_setup(cu)
    tags = [x.tag for x in z.beams]
    assert set(tags) <= {bw.STRONG, bw.WEAK, bw.ELIMINATED}
    assert z.beams[0].hkl == (0, 0, 0) and z.beams[0].s == 0.0


def test_matrix_examples(bragg200, vacuum):
    beams, _ = bragg200
    U = beams.beams[1].U.real
    np.testing.assert_allclose(bw.assemble_dynamical_matrix(beams), [[0, U], [U, 0]], atol=1e-14)
    cand = bw.generate_beams(sc.vacuum_cell(), vacuum[0].kin, g_max=1.0)
    beams = tuple(replace(b, tag=bw.STRONG) for b in cand.beams)
    A = bw.assemble_dynamical_matrix(replace(cand, beams=beams))
    np.testing.assert_allclose(np.diag(A).real, [2 * cand.kin.k0 * b.s for b in beams], atol=1e-12)
    assert np.count_nonzero(A - np.diag(np.diag(A))) == 0


def test_bethe_reduction_close_to_full_three_beam(cu, kin200):
    # weak (400) folded into {000, 200}; compare with the explicit 3x3 solve
    cand = bw.generate_beams(cu, kin200, row=(2, 0, 0), n_max=2)
    g = np.asarray(cand.beams[1].g)
    k = bw.tilted_incident(kin200, -g[:2] / 2)
    cand = bw.generate_beams(cu, kin200, row=(2, 0, 0), n_max=2, incident_k=k)
    keep = {(0, 0, 0), (2, 0, 0), (4, 0, 0)}
    tag = {(0, 0, 0): bw.STRONG, (2, 0, 0): bw.STRONG, (4, 0, 0): bw.WEAK}
    beams = tuple(replace(b, tag=tag.get(b.hkl, bw.ELIMINATED)) for b in cand.beams)
    red = replace(cand, beams=beams)
    full = replace(cand, beams=tuple(replace(b, tag=bw.STRONG if b.hkl in keep else bw.ELIMINATED) for b in beams))
    none = replace(cand, beams=tuple(replace(b, tag=bw.ELIMINATED) if b.tag == bw.WEAK else b for b in beams))
    solve = lambda b: bw.solve_bloch(bw.assemble_dynamical_matrix(b), b)
    d_bethe = bw.delta_I(solve(full), solve(red), 500.0)
    d_none = bw.delta_I(solve(full), solve(none), 500.0)
    assert d_bethe < 0.5 * d_none


def test_bethe_consistency_all_strong(cu, kin200):
    cand = bw.generate_beams(cu, kin200, bw.Orientation(), 1.8)
    huge = bw.partition_bethe(cand, 1e30, 2e30)
    full = bw.mark_all_strong(cand)
    solve = lambda b: bw.solve_bloch(bw.assemble_dynamical_matrix(b), b)
    assert bw.delta_I(solve(full), solve(huge), 500.0) < 1e-14


def test_dropping_strong_beam_increases_delta(zone200):
    beams, sol = zone200
    drop = beams.strong[3].hkl
    cut = replace(beams, beams=tuple(replace(b, tag=bw.ELIMINATED) if b.hkl == drop else b for b in beams.beams))
    sol_cut = bw.solve_bloch(bw.assemble_dynamical_matrix(cut), cut)
    assert bw.delta_I(sol, sol_cut, 500.0) > bw.delta_I(sol, sol, 500.0)


def test_vacuum_solution_identity(vacuum, cu):
    _, sol = vacuum
    np.testing.assert_allclose(sol.C, np.eye(1))
    np.testing.assert_allclose(sol.alphas, [1.0])
    r = random_points(np.random.default_rng(11), cu, 10)
    ws = bw.wave_at(sol, r, 1)
    np.testing.assert_allclose(ws.grad, 2j * np.pi * np.outer(ws.psi, sol.incident_k), rtol=1e-12)


def test_two_beam_eigen_closed_form(bragg200):
    beams, sol = bragg200
    U, k0 = beams.beams[1].U.real, beams.kin.k0
    np.testing.assert_allclose(sol.gammas, [U / (2 * k0), -U / (2 * k0)], rtol=1e-12)
    np.testing.assert_allclose(np.abs(sol.C), np.full((2, 2), 1 / math.sqrt(2)), rtol=1e-12)
    np.testing.assert_allclose(np.abs(sol.alphas), 1 / math.sqrt(2), rtol=1e-12)


def test_entrance_boundary(all_solutions, cu):
    rng = np.random.default_rng(12)
    r = random_points(rng, cu, 100)
    r[:, 2] = 0.0
    for sol in all_solutions.values():
        psi = bw.wave_at(sol, r, 0).psi
        np.testing.assert_allclose(psi, np.exp(2j * np.pi * r @ sol.incident_k), atol=1e-10)
        np.testing.assert_allclose(np.abs(psi) ** 2, 1.0, atol=1e-10)


def test_reconstruction_and_alpha_norm(all_solutions):
    for sol in all_solutions.values():
        A = bw.assemble_dynamical_matrix(sol.beamset)
        k0 = sol.kin.k0
        R = sol.C @ np.diag(2 * k0 * sol.gammas) @ sol.C.conj().T
        assert np.max(np.abs(R - A)) < 1e-8 * np.max(np.abs(A))
        assert np.sum(np.abs(sol.alphas) ** 2) == pytest.approx(1.0, abs=1e-10)


def test_eigen_order_invariance(zone200, cu):
    _, sol = zone200
    p = np.random.default_rng(13).permutation(len(sol.gammas))
    shuffled = replace(sol, gammas=sol.gammas[p], C=sol.C[:, p], alphas=sol.alphas[p])
    z = np.linspace(0, 500, 11)
    np.testing.assert_allclose(bw.beam_intensities(shuffled, z), bw.beam_intensities(sol, z), atol=1e-12)


def test_extinction_arithmetic():
    assert bw.extinction_distance(0.1, [0, 0, 40.0], [0, 0, 0]) == pytest.approx(400.0)
