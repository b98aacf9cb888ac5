import numpy as np
import pytest
from hypothesis import given, strategies as st

from simgate.fock import SectorSpec, build_basis, ladder_matrix, mode, sector_indices
from simgate.hamiltonians import (EffectiveDrive, LaserControls, LatticeDrive, LatticeParams,
                                  LatticeTerms, NearResonanceError, QubitControls,
                                  TwoQubitControls, delta_tilde, effective_hamiltonian,
                                  hermiticity_residual, hopping_for_shift, ideal_h1, ideal_h2,
                                  lattice_hamiltonian)

finite = st.floats(-5, 5, allow_nan=False)
positive = st.floats(0, 5, allow_nan=False)


def test_h1_examples():
    assert np.allclose(ideal_h1(QubitControls(delta=1.0)), np.diag([0.5, -0.5]))
    assert np.allclose(ideal_h1(QubitControls(omega=1.0)), 0.5 * np.array([[0, 1], [1, 0]]))


def test_h1_phase_sits_on_sigma_plus():
    h = ideal_h1(QubitControls(omega=2.0, phi=0.3))
    assert h[0, 1] == pytest.approx(np.exp(0.3j))


@given(finite, positive, st.floats(0, 2 * np.pi))
def test_h1_eigenvalues(delta, omega, phi):
    w = np.linalg.eigvalsh(ideal_h1(QubitControls(delta, omega, phi)))
    r = 0.5 * np.hypot(delta, omega)
    assert np.allclose(w, [-r, r], atol=1e-12)


def test_h2_examples():
    assert np.allclose(ideal_h2(TwoQubitControls(1.0, 0.0)), np.diag([0, 0, 0, 1]))
    h = ideal_h2(TwoQubitControls(0.0, 2.0))
    sx = np.array([[0, 1], [1, 0]])
    assert np.allclose(h[:2, :2], sx) and np.allclose(h[2:, 2:], sx)
    assert np.allclose(h[:2, 2:], 0)


@given(finite, finite)
def test_h2_trace(dt, ox):
    assert np.trace(ideal_h2(TwoQubitControls(dt, ox))).real == pytest.approx(dt, abs=1e-12)


def test_delta_tilde():
    assert delta_tilde(0.05, 0.5, 1.0) == pytest.approx(-0.005)
    assert delta_tilde(0.0, 3.0, 1.0) == 0.0
    assert delta_tilde(0.1, 1.5, 1.0) == pytest.approx(0.02)
    with pytest.raises(ZeroDivisionError):
        delta_tilde(0.1, 1.0, 1.0)


def test_hopping_for_shift_inverts_formula():
    j = hopping_for_shift(np.array([0.0, 0.02, 0.5]), 1.5, 1.0)
    assert np.allclose(delta_tilde(j, 1.5, 1.0), [0.0, 0.02, 0.5])
    with pytest.raises(ValueError):
        hopping_for_shift(-1.0, 1.5, 1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        LatticeParams(u_bb=1.0, j_b=-0.1)
    with pytest.raises(ValueError):
        LatticeParams(u_bb=np.inf)
    with pytest.raises(ValueError):
        LaserControls(rabi=-1.0)
    assert LaserControls(phase=-np.pi / 2).phase == pytest.approx(1.5 * np.pi)


def test_single_site_interactions():
    basis = build_basis(1, 2)
    h = lattice_hamiltonian(basis, LatticeParams(u_bb=3.0))
    assert h[basis.index((0, 2)), basis.index((0, 2))] == pytest.approx(3.0)
    h = lattice_hamiltonian(basis, LatticeParams(u_bb=0.0, u_ab=0.7))
    assert h[basis.index((1, 1)), basis.index((1, 1))] == pytest.approx(0.7)
    assert np.all(lattice_hamiltonian(basis, LatticeParams(u_bb=0.0)) == 0)


def hop_from_ladders(basis, species, k):
    """-(c^dag_{k+1} c_k + h.c.) assembled from single ladder matrices."""
    m_from, m_to = mode(k, species), mode(k + 1, species)
    lower = ladder_matrix(basis, m_from, "lower")
    up = ladder_matrix(lower.target, m_to, "raise", target=basis)
    fwd = (up.matrix @ lower.matrix).toarray()
    return -(fwd + fwd.T)


def test_b_hopping_elements():
    basis = build_basis(2, 3)
    h = lattice_hamiltonian(basis, LatticeParams(u_bb=0.0, j_b=0.3))
    assert np.allclose(h, 0.3 * hop_from_ladders(basis, "b", 0))
    # explicit element: b moves from site 0 (n=2 b) to site 1 (m=1 b)
    src = basis.index((0, 2, 0, 1))
    dst = basis.index((0, 1, 0, 2))
    assert h[dst, src] == pytest.approx(-0.3 * np.sqrt(2 * 2))


def test_tilt_and_laser_terms():
    basis = build_basis(2, 1)
    p = LatticeParams(u_bb=0.0, g=0.4)
    h = lattice_hamiltonian(basis, p, {1: LaserControls(detuning=1.0, rabi=2.0, phase=0.5)})
    a1, b1 = basis.index((0, 0, 1, 0)), basis.index((0, 0, 0, 1))
    assert h[a1, a1].real == pytest.approx(0.4 + 0.5)
    assert h[b1, b1].real == pytest.approx(0.4 - 0.5)
    assert h[a1, b1] == pytest.approx(np.exp(0.5j))           # (Omega/2) e^{i phi} a^dag b
    assert h[basis.index((1, 0, 0, 0)), basis.index((1, 0, 0, 0))] == 0


def test_laser_site_selection():
    basis = build_basis(2, 2)
    lasers = [LaserControls(rabi=1.0), LaserControls(rabi=1.0)]
    h_one = lattice_hamiltonian(basis, LatticeParams(u_bb=1.0), lasers, laser_sites=[0])
    h_both = lattice_hamiltonian(basis, LatticeParams(u_bb=1.0), lasers)
    assert not np.allclose(h_one, h_both)
    with pytest.raises(ValueError):
        lattice_hamiltonian(basis, LatticeParams(u_bb=1.0), {3: LaserControls()})


@given(st.tuples(positive, positive, positive, positive, positive, finite),
       st.tuples(finite, positive, st.floats(0, 6.3)))
def test_lattice_hamiltonian_hermitian(pv, lv):
    basis = build_basis(2, 3)
    p = LatticeParams(u_bb=pv[0], u_ab=pv[1], u_aa=pv[2], j_a=pv[3], j_b=pv[4], g=pv[5])
    h = lattice_hamiltonian(basis, p, {0: LaserControls(*lv), 1: LaserControls(*lv)})
    assert hermiticity_residual(h) <= 1e-12


def test_hopping_and_lasers_conserve_species_structure():
    basis = build_basis(3, 3)
    terms = LatticeTerms(basis)
    nb = basis.states[:, 1::2].sum(axis=1)
    # hopping keeps the number of b atoms, the laser flips one a <-> b
    assert np.allclose(terms.hop_b * (nb[:, None] - nb[None, :]), 0)
    assert np.allclose(terms.hop_a * (nb[:, None] - nb[None, :]), 0)
    f = terms.flip(1)
    rows, cols = np.nonzero(f)
    assert np.all(nb[cols] - nb[rows] == 1)


@pytest.mark.parametrize("occ", [(1, 1), (2, 1), (3, 1), (2, 2, 1)])
def test_sector_is_degenerate_eigenspace(occ):
    spec = SectorSpec(occ)
    basis = build_basis(spec.sites, spec.total_atoms)
    idx = sector_indices(basis, spec)
    h = lattice_hamiltonian(basis, LatticeParams(u_bb=2.5, g=0.3))
    vec = np.zeros((basis.dim, len(idx)))
    vec[idx, np.arange(len(idx))] = 1.0
    energies = np.real(np.diag(h)[idx])
    assert np.max(np.abs(h @ vec - vec * energies)) <= 1e-12
    assert np.ptp(energies) <= 1e-12
    # the nearest states with the same per-site totals sit exactly U_bb higher
    same = np.all(basis.site_totals() == np.array(occ), axis=1)
    same[idx] = False
    if np.any(same):
        assert np.min(np.real(np.diag(h))[same]) - energies[0] == pytest.approx(2.5, abs=1e-12)


def test_effective_textbook_second_order():
    h0 = np.diag([0.0, 4.0])
    v = np.array([[0, 0.1], [0.1, 0]])
    assert np.allclose(effective_hamiltonian(h0, v, [0]), [[-0.01 / 4.0]])
    assert np.allclose(effective_hamiltonian(np.diag(h0), np.zeros((2, 2)), [1]), [[4.0]])


def test_effective_rejects_non_diagonal_h0():
    with pytest.raises(ValueError):
        effective_hamiltonian(np.ones((2, 2)), np.zeros((2, 2)), [0])


def test_near_resonance():
    h0 = np.array([0.0, 1e-9, 5.0])
    v = np.zeros((3, 3))
    v[0, 1] = v[1, 0] = 0.1
    with pytest.raises(NearResonanceError):
        effective_hamiltonian(h0, v, [0])
    # uncoupled degeneracy is harmless
    v[0, 1] = v[1, 0] = 0.0
    v[0, 2] = v[2, 0] = 0.1
    assert np.allclose(effective_hamiltonian(h0, v, [0]), [[-0.01 / 5.0]])


def test_effective_is_hermitian_and_batched():
    rng = np.random.default_rng(3)
    e = np.array([0.0, 0.1, 3.0, 4.0, 5.5])
    vs = 0.05 * (rng.normal(size=(3, 5, 5)) + 1j * rng.normal(size=(3, 5, 5)))
    vs = vs + np.conj(np.swapaxes(vs, -1, -2))
    vs[:, [0, 1], [0, 1]] = 0
    batch = effective_hamiltonian(np.broadcast_to(e, (3, 5)), vs, [0, 1])
    for k in range(3):
        single = effective_hamiltonian(e, vs[k], [0, 1])
        assert np.allclose(batch[k], single)
        assert hermiticity_residual(single) <= 1e-12


def test_effective_error_scales_as_cube():
    """Eigenvalue error of the reduction stays below C ||v||^3 / gap^2."""
    rng = np.random.default_rng(11)
    e = np.array([0.0, 0.05, 2.0, 2.5, 3.0])
    gap = 2.0 - 0.05
    ratios = []
    for trial in range(12):
        base = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        base = base + base.conj().T
        base[np.arange(5), np.arange(5)] = 0
        for s in (1e-2, 2e-2, 4e-2):
            v = s * base
            heff = effective_hamiltonian(e, v, [0, 1])
            exact = np.linalg.eigvalsh(np.diag(e) + v)[:2]
            err = np.max(np.abs(np.linalg.eigvalsh(heff) - exact))
            norm = np.linalg.norm(v, 2)
            ratios.append(err * gap**2 / norm**3)
    assert max(ratios) < 10.0


def second_order_11_shift(j, g, u_bb):
    # b hops from either site onto the other one, which already holds a b atom
    return 2 * j**2 / (g - u_bb) - 2 * j**2 / (g + u_bb)


def test_effective_11_shift_matches_full_second_order():
    spec = SectorSpec((1, 1))
    basis = build_basis(2, 2)
    idx = sector_indices(basis, spec)
    terms = LatticeTerms(basis)
    for j in np.linspace(0.005, 0.025, 5):
        p = LatticeParams(u_bb=1.0, g=1.5)
        heff = effective_hamiltonian(terms.diagonal(p), j * terms.hop_b, idx)
        shift = heff[3, 3].real - terms.diagonal(p)[idx[3]]
        assert shift == pytest.approx(second_order_11_shift(j, 1.5, 1.0), rel=1e-12)
        # leading resonant term: bosonic enhancement doubles the textbook formula
        assert shift == pytest.approx(2 * delta_tilde(j, 1.5, 1.0) - 2 * j**2 / 2.5, rel=1e-12)


def test_lattice_drive_matches_static_assembly():
    spec = SectorSpec((2, 1))
    basis = build_basis(2, 3)
    idx = sector_indices(basis, spec)
    p = LatticeParams(u_bb=5.0, u_ab=0.3, u_aa=0.2, g=5.15)

    def controls(ts):
        return {"j_b": 0.1 + 0 * ts, "j_a": 0.05 + 0 * ts,
                "lasers": {1: {"delta": 0.2 + 0 * ts, "rabi": 0.4 + 0 * ts, "phase": 1.0 + 0 * ts}}}

    drive = LatticeDrive(basis, p, controls, idx)
    h = drive(0.3)
    ref = lattice_hamiltonian(basis, LatticeParams(5.0, 0.3, 0.2, 0.05, 0.1, 5.15),
                              {1: LaserControls(0.2, 0.4, 1.0)})
    shift = np.mean(np.real(np.diag(ref))[idx])
    assert np.allclose(h, ref - shift * np.eye(basis.dim))
    eff = EffectiveDrive(drive).stack(np.array([0.3, 0.7]))
    diag = np.real(np.diag(ref)) - shift
    v = ref - np.diag(np.diag(ref))
    assert np.allclose(eff[0], effective_hamiltonian(diag, v, idx))
    assert np.allclose(eff[0], eff[1])
