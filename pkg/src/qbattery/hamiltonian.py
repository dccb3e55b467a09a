"""Second-quantized Hamiltonians on truncated oscillator-mode Fock bases.

The quench Hamiltonian splits as H1 = H0 + Hint with

    H0   = sum_sigma sum_i (i + 1/2) omega_sigma n_i
           + (g_B / 2) sum_{ijkl} U^B_{ijkl} a+_i a+_j a_l a_k (battery),
    Hint = g_BC sum_{ijkl} U^{BC}_{ijkl} a+_{B,i} a+_{C,j} a_{C,l} a_{B,k}.

Operators are applied through occupation-vector rules (a_j -> sqrt(n_j),
a+_j -> sqrt(n_j + 1)) with hash-indexed state lookup. The index/amplitude
tables depend only on the basis structure, so they are cached and reused
across frequency and coupling scans.
"""

from __future__ import annotations

import json
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .basis import enumerate_fock_states, fock_parity
from .errors import ConfigError
from .integrals import contact_tensor

_TABLE_CACHE_SLOTS = 8


def _state_structure(num_particles, num_modes):
    states = enumerate_fock_states(num_particles, num_modes)
    index = {occ: i for i, occ in enumerate(states)}
    diag = np.array([sum((j + 0.5) * n for j, n in enumerate(occ))
                     for occ in states])
    return states, index, diag


def _build_hop_table(states, index, num_modes):
    """One-body transitions a+_i a_k with k occupied; columns first."""
    cols, rows, i_idx, k_idx, amps = [], [], [], [], []
    for col, occ in enumerate(states):
        for k, nk in enumerate(occ):
            if nk == 0:
                continue
            removed = list(occ)
            removed[k] -= 1
            amp_k = math.sqrt(nk)
            for i in range(num_modes):
                target = list(removed)
                target[i] += 1
                cols.append(col)
                rows.append(index[tuple(target)])
                i_idx.append(i)
                k_idx.append(k)
                amps.append(amp_k * math.sqrt(removed[i] + 1))
    return (np.array(cols, dtype=np.int64), np.array(rows, dtype=np.int64),
            np.array(i_idx, dtype=np.int64), np.array(k_idx, dtype=np.int64),
            np.array(amps))


def _build_pair_table(states, index, num_modes):
    """Two-body transitions a+_i a+_j a_l a_k; all ordered index choices."""
    cols, rows, idx, amps = [], [], [], []
    for col, occ in enumerate(states):
        for k, nk in enumerate(occ):
            if nk == 0:
                continue
            occ1 = list(occ)
            occ1[k] -= 1
            amp_k = math.sqrt(nk)
            for l, nl in enumerate(occ1):
                if nl == 0:
                    continue
                occ2 = list(occ1)
                occ2[l] -= 1
                amp_kl = amp_k * math.sqrt(nl)
                for j in range(num_modes):
                    occ3 = list(occ2)
                    occ3[j] += 1
                    amp_klj = amp_kl * math.sqrt(occ3[j])
                    for i in range(num_modes):
                        occ4 = list(occ3)
                        occ4[i] += 1
                        cols.append(col)
                        rows.append(index[tuple(occ4)])
                        idx.append((i, j, k, l))
                        amps.append(amp_klj * math.sqrt(occ4[i]))
    return (np.array(cols, dtype=np.int64), np.array(rows, dtype=np.int64),
            np.array(idx, dtype=np.int64).reshape(-1, 4), np.array(amps))


class _StructureCache:
    def __init__(self, slots):
        self._slots = slots
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def fetch(self, key, builder):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        value = builder()
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self._slots:
                self._data.popitem(last=False)
        return value


_structures = _StructureCache(_TABLE_CACHE_SLOTS)
_hop_tables = _StructureCache(_TABLE_CACHE_SLOTS)
_pair_tables = _StructureCache(_TABLE_CACHE_SLOTS)


def _get_structure(num_particles, num_modes):
    return _structures.fetch(
        (num_particles, num_modes),
        lambda: _state_structure(num_particles, num_modes))


def _get_hop_table(num_particles, num_modes):
    states, index, _ = _get_structure(num_particles, num_modes)
    return _hop_tables.fetch(
        (num_particles, num_modes),
        lambda: _build_hop_table(states, index, num_modes))


def _get_pair_table(num_particles, num_modes):
    states, index, _ = _get_structure(num_particles, num_modes)
    return _pair_tables.fetch(
        (num_particles, num_modes),
        lambda: _build_pair_table(states, index, num_modes))


def _accumulate(dim, flat_chunks, value_chunks):
    flat = np.concatenate(flat_chunks)
    vals = np.concatenate(value_chunks)
    return np.bincount(flat, weights=vals, minlength=dim * dim).reshape(dim, dim)


def _battery_interaction(num_particles, num_modes, g, omega):
    """Dense (g/2) sum U a+a+aa on the battery Fock basis."""
    states, _, _ = _get_structure(num_particles, num_modes)
    dim = len(states)
    cols, rows, idx, amps = _get_pair_table(num_particles, num_modes)
    tensor = contact_tensor(num_modes, num_modes, omega, omega)
    vals = 0.5 * g * amps * tensor[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]]
    return _accumulate(dim, [rows * dim + cols], [vals])


@dataclass
class BatteryHamiltonian:
    """Battery-only Hamiltonian with its spectral decomposition."""

    num_particles: int
    num_modes: int
    g: float
    omega: float
    states: tuple
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return len(self.states)

    @property
    def ground_energy(self):
        return float(self.eigenvalues[0])

    @property
    def ground_state(self):
        return self.eigenvectors[:, 0]


def assemble_battery_only(num_particles, num_modes, g_B, omega_B):
    """Battery Hamiltonian on its own Fock basis, eigendecomposed.

    With g_B = 0 the matrix is diagonal and the decomposition is a sorted
    permutation; no dense solve is run in that case.
    """
    if num_particles < 1 or num_modes < 1:
        raise ConfigError("need num_particles >= 1 and num_modes >= 1")
    if omega_B <= 0:
        raise ConfigError("omega_B must be positive")
    states, _, diag = _get_structure(num_particles, num_modes)
    dim = len(states)
    h = np.diag(omega_B * diag)
    if g_B != 0.0:
        h = h + _battery_interaction(num_particles, num_modes, g_B, omega_B)
        eigenvalues, eigenvectors = np.linalg.eigh(h)
    else:
        order = np.argsort(omega_B * diag, kind="stable")
        eigenvalues = omega_B * diag[order]
        eigenvectors = np.eye(dim)[:, order]
    return BatteryHamiltonian(
        num_particles=num_particles, num_modes=num_modes, g=g_B, omega=omega_B,
        states=tuple(states), matrix=h,
        eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def _resolve_freqs(basis, omega_B, omega_C):
    wb = basis.battery.omega if omega_B is None else omega_B
    wc = basis.charger.omega if omega_C is None else omega_C
    if wb <= 0 or wc <= 0:
        raise ConfigError("frequencies must be positive")
    return wb, wc


def assemble_H0(basis, g_B, omega_B=None, omega_C=None):
    """Decoupled Hamiltonian on the composite sector basis.

    Frequencies default to the ones stored in the basis configs; passing
    them explicitly reuses the same basis structure across frequency scans.
    """
    wb, wc = _resolve_freqs(basis, omega_B, omega_C)
    dim = basis.size
    nb, mb = basis.battery.num_particles, basis.battery.num_modes
    _, _, bat_diag = _get_structure(nb, mb)

    h = np.zeros((dim, dim))
    diag = (wb * bat_diag[basis.battery_index]
            + wc * (basis.charger_index + 0.5))
    h[np.arange(dim), np.arange(dim)] = diag

    if g_B != 0.0:
        cols, rows, idx, amps = _get_pair_table(nb, mb)
        tensor = contact_tensor(mb, mb, wb, wb)
        base = 0.5 * g_B * amps * tensor[idx[:, 0], idx[:, 1],
                                         idx[:, 2], idx[:, 3]]
        flat_chunks, val_chunks = [], []
        for c in range(basis.charger.num_modes):
            prow = basis.index_matrix[rows, c]
            pcol = basis.index_matrix[cols, c]
            valid = (prow >= 0) & (pcol >= 0)
            if not valid.any():
                continue
            flat_chunks.append(prow[valid] * dim + pcol[valid])
            val_chunks.append(base[valid])
        if flat_chunks:
            h += _accumulate(dim, flat_chunks, val_chunks)
    return h


def assemble_Hint(basis, g_BC, omega_B=None, omega_C=None):
    """Contact battery-charger coupling on the composite sector basis."""
    wb, wc = _resolve_freqs(basis, omega_B, omega_C)
    dim = basis.size
    nb, mb = basis.battery.num_particles, basis.battery.num_modes
    mc = basis.charger.num_modes
    if g_BC == 0.0:
        return np.zeros((dim, dim))

    bcols, brows, i_idx, k_idx, amps = _get_hop_table(nb, mb)
    tensor = contact_tensor(mb, mc, wb, wc)
    jgrid = np.arange(mc)
    flat_chunks, val_chunks = [], []
    for c in range(mc):
        pcol = basis.index_matrix[bcols, c]
        live = pcol >= 0
        if not live.any():
            continue
        prow = basis.index_matrix[np.ix_(brows[live], jgrid)]
        vals = (g_BC * amps[live, None]
                * tensor[i_idx[live, None], jgrid[None, :], k_idx[live, None], c])
        valid = prow >= 0
        flat_chunks.append((prow[valid] * dim
                            + np.broadcast_to(pcol[live, None], prow.shape)[valid]))
        val_chunks.append(vals[valid])
    return _accumulate(dim, flat_chunks, val_chunks)


@dataclass
class HamiltonianSet:
    """Assembled H0, Hint and their sum for one configuration."""

    basis: object
    g_B: float
    g_BC: float
    omega_B: float
    omega_C: float
    h0: np.ndarray
    hint: np.ndarray

    @property
    def h1(self):
        return self.h0 + self.hint


def build_hamiltonian_set(basis, g_B, g_BC, omega_B=None, omega_C=None):
    """Assemble the full set and verify Hermiticity of each piece."""
    wb, wc = _resolve_freqs(basis, omega_B, omega_C)
    h0 = assemble_H0(basis, g_B, wb, wc)
    hint = assemble_Hint(basis, g_BC, wb, wc)
    for name, mat in (("H0", h0), ("Hint", hint)):
        skew = np.max(np.abs(mat - mat.T)) if mat.size else 0.0
        if skew > 1e-12:
            raise AssertionError(f"{name} assembly lost Hermiticity: {skew}")
    return HamiltonianSet(basis=basis, g_B=g_B, g_BC=g_BC,
                          omega_B=wb, omega_C=wc, h0=h0, hint=hint)


def dump_matrix(matrix, path, meta=None):
    """Write a matrix for offline inspection.

    ``.npy`` paths get a binary dump plus a JSON sidecar with the metadata;
    anything else is written as CSV with ``#`` header lines (row-major).
    """
    matrix = np.asarray(matrix)
    meta = dict(meta or {})
    meta.setdefault("dim", matrix.shape[0])
    path = str(path)
    if path.endswith(".npy"):
        np.save(path, matrix)
        with open(path[:-4] + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    else:
        header = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
        np.savetxt(path, matrix, delimiter=",",
                   header=f"row-major dense matrix; {header}")
    return path


def composite_parity_vector(basis):
    """Total parity of each kept pair (diagnostic; constant within a sector)."""
    bat = np.array([fock_parity(s) for s in basis.battery_states])
    chg = np.array([fock_parity(s) for s in basis.charger_states])
    return bat[basis.battery_index] * chg[basis.charger_index]
