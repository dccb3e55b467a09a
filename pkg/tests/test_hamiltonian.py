"""Hamiltonian assembly against first-quantized brute-force references."""

import math

import numpy as np
import pytest

from qbattery.basis import (ParitySector, Species, SpeciesConfig,
                            build_composite_basis, fock_energy, fock_parity)
from qbattery.errors import ConfigError
from qbattery.hamiltonian import (assemble_battery_only, assemble_H0,
                                  assemble_Hint, build_hamiltonian_set,
                                  composite_parity_vector, dump_matrix)
from qbattery.integrals import two_body_contact


def make_basis(num_particles=2, modes=6, omega_C=1.0,
               sector=ParitySector.ODD):
    battery = SpeciesConfig(Species.BATTERY, omega=1.0, num_modes=modes,
                            num_particles=num_particles)
    charger = SpeciesConfig(Species.CHARGER, omega=omega_C, num_modes=modes,
                            num_particles=1)
    return build_composite_basis(battery, charger, sector)


def pair_element(bra, ket, omega, g):
    """<bra| g delta(x1 - x2) |ket> for two bosons in one trap.

    Brute force from symmetrized first-quantized wavefunctions: the
    element reduces to a single contact integral with a multiplicity
    factor of sqrt(2) for each doubly-occupied side.
    """
    (a, b) = bra
    (c, d) = ket
    factor = g
    if a == b:
        factor /= math.sqrt(2.0)
    if c == d:
        factor /= math.sqrt(2.0)
    return 2.0 * factor * two_body_contact(a, c, b, d, omega, omega)


def occupations_to_pair(occ):
    modes = [m for m, n in enumerate(occ) for _ in range(n)]
    assert len(modes) == 2
    return tuple(modes)


def test_battery_free_spectrum_is_fock_energies():
    bat = assemble_battery_only(2, 5, 0.0, 1.0)
    want = sorted(fock_energy(s, 1.0) for s in bat.states)
    np.testing.assert_allclose(bat.eigenvalues, want, atol=1e-12)
    # eigenvectors are a permutation of the identity
    np.testing.assert_allclose(np.abs(bat.eigenvectors).sum(axis=0),
                               np.ones(bat.dim), atol=0)


def test_battery_single_mode_interacting_energy():
    # two bosons in one mode: E = 1 + sqrt(1/(2 pi))
    bat = assemble_battery_only(2, 1, 1.0, 1.0)
    assert bat.dim == 1
    assert bat.ground_energy == pytest.approx(1.0 + 1.0 / math.sqrt(2 * math.pi),
                                              abs=1e-13)


def test_battery_interaction_matches_first_quantized_pair():
    g = 0.37
    bat = assemble_battery_only(2, 4, g, 1.0)
    for r, occ_r in enumerate(bat.states):
        for c, occ_c in enumerate(bat.states):
            want = pair_element(occupations_to_pair(occ_r),
                                occupations_to_pair(occ_c), 1.0, g)
            if r == c:
                want += fock_energy(occ_r, 1.0)
            assert bat.matrix[r, c] == pytest.approx(want, abs=1e-12), \
                (occ_r, occ_c)


def test_battery_hamiltonian_is_hermitian_and_parity_block():
    bat = assemble_battery_only(3, 5, 0.8, 1.0)
    np.testing.assert_allclose(bat.matrix, bat.matrix.T, atol=0)
    par = np.array([fock_parity(s) for s in bat.states])
    cross = bat.matrix[np.ix_(par == 1, par == -1)]
    assert np.abs(cross).max() == 0.0


def test_h0_diagonal_without_battery_interaction():
    basis = make_basis(num_particles=2, modes=5, omega_C=1.7)
    h0 = assemble_H0(basis, g_B=0.0)
    np.testing.assert_allclose(h0, np.diag(np.diag(h0)), atol=0)
    for k, (bi, ci) in enumerate(basis.kept_pairs):
        want = (fock_energy(basis.battery_states[bi], 1.0)
                + 1.7 * (ci + 0.5))
        assert h0[k, k] == pytest.approx(want, abs=1e-12)


def test_h0_battery_term_acts_identically_on_charger_blocks():
    basis = make_basis(num_particles=2, modes=5)
    h0 = assemble_H0(basis, g_B=0.9)
    bat = assemble_battery_only(2, 5, 0.9, 1.0)
    # every composite element equals the battery-only element when the
    # charger index is shared, zero otherwise
    for r, (bi, ci) in enumerate(basis.kept_pairs):
        for c, (bj, cj) in enumerate(basis.kept_pairs):
            if r == c:
                continue
            want = bat.matrix[bi, bj] if ci == cj else 0.0
            assert h0[r, c] == pytest.approx(want, abs=1e-12)


def test_hint_single_battery_particle_is_contact_tensor():
    # one battery particle: the coupling element is g_BC U_{b c b' c'}
    basis = make_basis(num_particles=1, modes=5, omega_C=2.3)
    g = 0.11
    hint = assemble_Hint(basis, g)
    for r, (bi, ci) in enumerate(basis.kept_pairs):
        b = int(np.flatnonzero(basis.battery_states[bi])[0])
        for c, (bj, cj) in enumerate(basis.kept_pairs):
            bp = int(np.flatnonzero(basis.battery_states[bj])[0])
            want = g * two_body_contact(b, ci, bp, cj, 1.0, 2.3)
            assert hint[r, c] == pytest.approx(want, abs=1e-12)


def test_hint_hermitian_and_parity_preserving():
    basis = make_basis(num_particles=2, modes=6, sector=ParitySector.FULL)
    hint = assemble_Hint(basis, 0.1)
    np.testing.assert_allclose(hint, hint.T, atol=1e-14)
    par = composite_parity_vector(basis)
    cross = hint[np.ix_(par == 1, par == -1)]
    assert np.abs(cross).max() == 0.0


def test_full_sector_consistent_with_parity_blocks():
    odd = make_basis(num_particles=2, modes=5, sector=ParitySector.ODD)
    full = make_basis(num_particles=2, modes=5, sector=ParitySector.FULL)
    h_odd = assemble_Hint(odd, 0.2)
    h_full = assemble_Hint(full, 0.2)
    # map odd-sector pairs into the full basis
    lookup = {pair: k for k, pair in enumerate(full.kept_pairs)}
    sel = np.array([lookup[pair] for pair in odd.kept_pairs])
    np.testing.assert_allclose(h_odd, h_full[np.ix_(sel, sel)], atol=1e-14)


def test_hamiltonian_set_h1_sum():
    basis = make_basis(num_particles=2, modes=5)
    hs = build_hamiltonian_set(basis, g_B=0.3, g_BC=0.1)
    np.testing.assert_allclose(hs.h1, hs.h0 + hs.hint, atol=0)


def test_assemble_validation():
    with pytest.raises(ConfigError):
        assemble_battery_only(0, 4, 0.0, 1.0)
    with pytest.raises(ConfigError):
        assemble_battery_only(2, 4, 0.0, -1.0)
    basis = make_basis()
    with pytest.raises(ConfigError):
        assemble_H0(basis, 0.0, omega_C=-2.0)


def test_dump_matrix_round_trip(tmp_path):
    basis = make_basis(num_particles=1, modes=4)
    h = assemble_Hint(basis, 0.1)
    npy = tmp_path / "hint.npy"
    dump_matrix(h, npy, meta={"g_BC": 0.1})
    np.testing.assert_allclose(np.load(npy), h, atol=0)
    assert (tmp_path / "hint.json").exists()
    csv_path = tmp_path / "hint.csv"
    dump_matrix(h, csv_path)
    np.testing.assert_allclose(np.loadtxt(csv_path, delimiter=","), h,
                               atol=1e-12)
