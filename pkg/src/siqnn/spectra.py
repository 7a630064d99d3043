"""Exact diagonalization, state tracking across geometry, targets, datasets.

Diagonalization is restricted to the fixed (N, S_z) occupation sector; S_z = 0
holds every spin multiplet's S_z = 0 component, which is enough for singlet
and triplet energies and for dipole matrix elements (the dipole operator
conserves N and S_z). Eigenstates are tracked across the scan by eigenvector
overlap so that a target series keeps its physical identity through orderings
and near-degeneracies; series whose overlap drops below threshold anywhere are
flagged as avoided-crossing suspects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .fermions import build_dipole_operator, build_qubit_hamiltonian, s2_operator
from .integrals import ActiveSpaceIntegrals, Bundle
from .paulis import PauliSum

EIGEN_RESIDUAL_TOL = 1e-8
DEGENERACY_TOL = 1e-9
OVERLAP_FLAG_THRESHOLD = 0.8
OVERLAP_HARD_FLOOR = 0.5


class TrackingError(RuntimeError):
    """Raised when adjacent-geometry overlaps are too small to track states."""


@lru_cache(maxsize=64)
def sector_basis(n_orb: int, n_alpha: int, n_beta: int) -> np.ndarray:
    """Basis indices with n_alpha bits set in qubits [0, n_orb) and n_beta above."""
    alpha = [k for k in range(1 << n_orb) if bin(k).count("1") == n_alpha]
    beta = [k for k in range(1 << n_orb) if bin(k).count("1") == n_beta]
    idx = sorted((b << n_orb) | a for a in alpha for b in beta)
    return np.asarray(idx, dtype=np.int64)


def restrict_to_sector(op: PauliSum, indices: np.ndarray) -> np.ndarray:
    """Dense matrix of `op` on the subspace spanned by the given basis indices."""
    dim = 1 << op.n_qubits
    pos = np.full(dim, -1, dtype=np.int64)
    pos[indices] = np.arange(indices.size)
    cols = np.arange(indices.size)
    m = np.zeros((indices.size, indices.size), dtype=complex)
    for string, coeff in op:
        rows = pos[indices ^ string.x_mask]
        ok = rows >= 0
        m[rows[ok], cols[ok]] += coeff * string.phases(indices)[ok]
    return m


@lru_cache(maxsize=64)
def _s2_sector_matrix(n_orb: int, n_alpha: int, n_beta: int) -> np.ndarray:
    return restrict_to_sector(s2_operator(n_orb), sector_basis(n_orb, n_alpha, n_beta))


@dataclass
class GeometrySpectrum:
    """Eigen-decomposition of one geometry's Hamiltonian in one (N, S_z) sector."""

    r: float
    n_qubits: int
    sector_indices: np.ndarray
    energies: np.ndarray          # ascending, Hartree
    vectors: np.ndarray           # (sector_dim, n_states) columns, orthonormal
    s2: np.ndarray                # per-state <S^2>
    n_elec: int
    max_residual: float

    @property
    def ground_index(self) -> int:
        return 0

    def number_expectations(self) -> np.ndarray:
        return np.full(self.energies.size, float(self.n_elec))

    def full_vector(self, j: int) -> np.ndarray:
        out = np.zeros(1 << self.n_qubits, dtype=complex)
        out[self.sector_indices] = self.vectors[:, j]
        return out


def sector_split(n_elec: int, sz_sector: float) -> tuple[int, int]:
    n_alpha = (n_elec + round(2 * sz_sector)) / 2
    if n_alpha != int(n_alpha):
        raise ValueError(f"no ({n_elec}, S_z={sz_sector}) sector exists")
    n_alpha = int(n_alpha)
    n_beta = n_elec - n_alpha
    if n_alpha < 0 or n_beta < 0:
        raise ValueError(f"no ({n_elec}, S_z={sz_sector}) sector exists")
    return n_alpha, n_beta


def diagonalize(hamiltonian: PauliSum, n_elec: int | None, sz_sector: float = 0.0,
                r: float = 0.0) -> GeometrySpectrum:
    """All eigenpairs of the Hamiltonian restricted to one (N, S_z) sector.

    n_elec=None diagonalizes the full register without sector restriction
    (then <S^2> values are not computed).
    """
    n_qubits = hamiltonian.n_qubits
    if n_qubits > 14:
        raise ValueError(f"{n_qubits} qubits exceeds the dense diagonalization guard (14)")
    if n_elec is None:
        indices = np.arange(1 << n_qubits, dtype=np.int64)
        s2_mat = None
    else:
        n_orb = n_qubits // 2
        n_alpha, n_beta = sector_split(n_elec, sz_sector)
        if n_alpha > n_orb or n_beta > n_orb:
            raise ValueError("sector is empty for this register size")
        indices = sector_basis(n_orb, n_alpha, n_beta)
        s2_mat = _s2_sector_matrix(n_orb, n_alpha, n_beta)
    h = restrict_to_sector(hamiltonian, indices)
    herm_dev = np.max(np.abs(h - h.conj().T))
    if herm_dev > 1e-9:
        raise ValueError(f"restricted Hamiltonian is not Hermitian (deviation {herm_dev:.2e})")
    h = 0.5 * (h + h.conj().T)
    energies, vectors = np.linalg.eigh(h)
    residual = float(np.max(np.linalg.norm(h @ vectors - vectors * energies, axis=0)))
    if residual > EIGEN_RESIDUAL_TOL:
        raise RuntimeError(f"eigen-residual {residual:.2e} exceeds {EIGEN_RESIDUAL_TOL}")
    if s2_mat is None:
        s2 = np.full(energies.size, np.nan)
    else:
        s2 = np.real(np.einsum("ij,ik,kj->j", vectors.conj(), s2_mat, vectors))
    return GeometrySpectrum(
        r=r, n_qubits=n_qubits, sector_indices=indices, energies=energies,
        vectors=vectors, s2=s2, n_elec=n_elec if n_elec is not None else -1,
        max_residual=residual,
    )


def classify_state(s2_expectation: float) -> str:
    """Spin label from <S^2>: 0 -> singlet, 2 -> triplet, else other."""
    if abs(s2_expectation) < 0.1:
        return "singlet"
    if abs(s2_expectation - 2.0) < 0.1:
        return "triplet"
    return "other"


def fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real positive."""
    k = int(np.argmax(np.abs(vec)))
    ph = vec[k] / abs(vec[k])
    return vec / ph


def tdm_norm(psi0: np.ndarray, psij: np.ndarray,
             mu: tuple[PauliSum, PauliSum, PauliSum]) -> float:
    """L2 norm of the dipole matrix element between two full-space states."""
    from .simulator import apply_pauli_sum

    psi0 = fix_phase(np.asarray(psi0, dtype=complex))
    psij = fix_phase(np.asarray(psij, dtype=complex))
    comps = [np.vdot(psij, apply_pauli_sum(psi0, mu_c)) for mu_c in mu]
    return float(np.sqrt(sum(abs(c) ** 2 for c in comps)))


def _degenerate_blocks(energies: np.ndarray, tol: float) -> list[np.ndarray]:
    blocks = []
    start = 0
    for i in range(1, energies.size + 1):
        if i == energies.size or energies[i] - energies[i - 1] > tol:
            blocks.append(np.arange(start, i))
            start = i
    return blocks


@dataclass
class TrackedStates:
    """Continuously indexed eigenstate series over the R grid."""

    grid: np.ndarray
    energies: np.ndarray            # (n_series, n_geoms)
    vectors: list[np.ndarray]       # per geometry: (sector_dim, n_series)
    s2: np.ndarray                  # (n_series, n_geoms)
    flags: dict[int, list[int]]     # series -> geometry steps with weak overlap
    min_overlap: np.ndarray         # (n_series,) worst assignment overlap
    lost: dict[int, int] = field(default_factory=dict)  # series -> first lost step

    @property
    def n_series(self) -> int:
        return self.energies.shape[0]

    def flagged(self, j: int) -> bool:
        return bool(self.flags.get(j)) or j in self.lost


def track_states(spectra: list[GeometrySpectrum], n_series: int | None = None,
                 overlap_threshold: float = OVERLAP_FLAG_THRESHOLD,
                 degeneracy_tol: float = DEGENERACY_TOL) -> TrackedStates:
    """Follow eigenstates across the grid by maximal eigenvector overlap.

    Assignment is greedy in ascending energy and block-aware: exactly
    degenerate eigenstates are treated as one subspace, and a tracked series
    continues as the normalized projection of its previous vector onto the
    assigned block, which keeps per-series quantities invariant under
    arbitrary re-mixing inside degenerate blocks.

    A step where a series' best overlap falls below the hard floor marks the
    series as lost: it is reported (excluded from usable targets), never
    silently guessed. Only a lost ground series aborts the whole scan.
    """
    if len(spectra) < 2:
        raise ValueError("need at least two geometries to track states")
    dim = spectra[0].energies.size
    k = dim if n_series is None else min(n_series, dim)

    grid = np.asarray([sp.r for sp in spectra])
    energies = np.zeros((k, len(spectra)))
    s2 = np.zeros((k, len(spectra)))
    vectors: list[np.ndarray] = []
    flags: dict[int, list[int]] = {}
    min_overlap = np.ones(k)

    cur = spectra[0].vectors[:, :k].astype(complex)
    energies[:, 0] = spectra[0].energies[:k]
    s2[:, 0] = spectra[0].s2[:k]
    vectors.append(cur)
    lost: dict[int, int] = {}

    for g in range(1, len(spectra)):
        sp = spectra[g]
        blocks = _degenerate_blocks(sp.energies, degeneracy_tol)
        ov = np.abs(sp.vectors.conj().T @ cur) ** 2      # (dim states, k series)
        block_ov = np.stack([ov[b].sum(axis=0) for b in blocks])  # (n_blocks, k)
        capacity = np.array([b.size for b in blocks])
        assigned: dict[int, list[int]] = {}
        order = np.argsort(energies[:, g - 1], kind="stable")
        for j in order:
            scores = np.where(capacity > 0, block_ov[:, j], -1.0)
            b = int(np.argmax(scores))
            best = float(scores[b])
            if best < OVERLAP_HARD_FLOOR and int(j) not in lost:
                if j == 0:
                    raise TrackingError(
                        f"ground series: best overlap {best:.3f} at R={sp.r:.4f} "
                        f"(step {g}) is below {OVERLAP_HARD_FLOOR}; grid too sparse"
                    )
                lost[int(j)] = g
            if best < overlap_threshold:
                flags.setdefault(int(j), []).append(g)
            min_overlap[j] = min(min_overlap[j], best)
            capacity[b] -= 1
            assigned.setdefault(b, []).append(int(j))

        nxt = np.zeros((sp.vectors.shape[0], k), dtype=complex)
        for b, members in assigned.items():
            basis = sp.vectors[:, blocks[b]]
            coeff = basis.conj().T @ cur[:, members]      # (|B|, m)
            # Loewdin orthonormalization keeps the projected set orthonormal
            # without preferring any member.
            overlap = coeff.conj().T @ coeff
            evals, evecs = np.linalg.eigh(overlap)
            evals = np.clip(evals, 1e-30, None)
            coeff = coeff @ (evecs * (evals**-0.5)) @ evecs.conj().T
            proj = basis @ coeff
            weights = np.abs(coeff) ** 2
            weights /= weights.sum(axis=0)
            for m, j in enumerate(members):
                nxt[:, j] = proj[:, m]
                energies[j, g] = float(np.mean(sp.energies[blocks[b]]))
                s2[j, g] = float(weights[:, m] @ sp.s2[blocks[b]])
        vectors.append(nxt)
        cur = nxt

    return TrackedStates(grid=grid, energies=energies, vectors=vectors, s2=s2,
                         flags=flags, min_overlap=min_overlap, lost=lost)


def transition_energy(spectrum: GeometrySpectrum, j: int) -> float:
    return float(spectrum.energies[j] - spectrum.energies[spectrum.ground_index])


@dataclass
class TargetSeries:
    """One regression target over the scan grid."""

    kind: str                   # 'transition_energy' | 'tdm_norm'
    label: str                  # 'S1'..'T4'
    grid: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    flagged_steps: list[int] = field(default_factory=list)

    def max_value(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class Scaling:
    """Min-max map onto [-1, 1] for R and the target."""

    r_min: float
    r_max: float
    y_min: float
    y_max: float

    def scale_r(self, r):
        return _minmax(np.asarray(r, dtype=float), self.r_min, self.r_max)

    def scale_y(self, y):
        return _minmax(np.asarray(y, dtype=float), self.y_min, self.y_max)

    def unscale_y(self, ys):
        ys = np.asarray(ys, dtype=float)
        return 0.5 * (ys + 1.0) * (self.y_max - self.y_min) + self.y_min

    @property
    def y_half_range(self) -> float:
        """Physical units per scaled unit: loss_phys = loss_scaled * this^2."""
        half = 0.5 * (self.y_max - self.y_min)
        return half if half > 0 else 1.0

    def to_dict(self) -> dict:
        return {"r_min": self.r_min, "r_max": self.r_max,
                "y_min": self.y_min, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaling":
        return cls(d["r_min"], d["r_max"], d["y_min"], d["y_max"])


def _minmax(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi <= lo:
        return np.zeros_like(x)
    return 2.0 * (x - lo) / (hi - lo) - 1.0


@dataclass
class Dataset:
    """Ground states + distances as features, one scalar series as target."""

    molecule: str
    kind: str
    label: str
    states: np.ndarray          # (M, 2^n) complex ground states
    r: np.ndarray               # (M,) Angstrom
    y: np.ndarray               # (M,) Hartree or e*a0
    scaling: Scaling

    @property
    def m(self) -> int:
        return self.r.size

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.states.shape[1]))

    @property
    def r_scaled(self) -> np.ndarray:
        return self.scaling.scale_r(self.r)

    @property
    def y_scaled(self) -> np.ndarray:
        return self.scaling.scale_y(self.y)

    def save(self, path: str | Path) -> None:
        """Metadata as JSON; amplitudes in a sibling .amps file of little-endian
        float64 (re, im) pairs, row-major over (M, 2^n)."""
        path = Path(path)
        amps_path = path.with_suffix(".amps")
        meta = {
            "kind": "siqnn-dataset-v1",
            "molecule": self.molecule,
            "target_kind": self.kind,
            "target_label": self.label,
            "m": int(self.m),
            "n_qubits": self.n_qubits,
            "r": [float(v) for v in self.r],
            "y": [float(v) for v in self.y],
            "scaling": self.scaling.to_dict(),
            "amps_file": amps_path.name,
            "amps_layout": "float64-le (re,im) pairs, row-major (M, 2^n)",
        }
        path.write_text(json.dumps(meta, indent=1))
        flat = np.empty((self.states.size, 2))
        flat[:, 0] = self.states.real.ravel()
        flat[:, 1] = self.states.imag.ravel()
        flat.astype("<f8").tofile(amps_path)

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        meta = json.loads(path.read_text())
        if meta.get("kind") != "siqnn-dataset-v1":
            raise ValueError(f"{path}: not a dataset cache")
        m, nq = meta["m"], meta["n_qubits"]
        raw = np.fromfile(path.parent / meta["amps_file"], dtype="<f8").reshape(-1, 2)
        states = (raw[:, 0] + 1j * raw[:, 1]).reshape(m, 1 << nq)
        return cls(
            molecule=meta["molecule"], kind=meta["target_kind"], label=meta["target_label"],
            states=states, r=np.asarray(meta["r"]), y=np.asarray(meta["y"]),
            scaling=Scaling.from_dict(meta["scaling"]),
        )


class ScanSpectra:
    """Per-bundle diagonalization, tracking, labeling, and dataset assembly."""

    def __init__(self, bundle: Bundle, sz_sector: float = 0.0,
                 n_series: int | None = None):
        self.bundle = bundle
        self.spectra = []
        self._mu_mats = []
        sector = None
        for rec in bundle.records:
            h = build_qubit_hamiltonian(rec)
            sp = diagonalize(h, rec.n_elec, sz_sector, r=rec.r)
            if sector is None:
                sector = sp.sector_indices
            mu = build_dipole_operator(rec)
            self._mu_mats.append([restrict_to_sector(m, sector) for m in mu])
            self.spectra.append(sp)
        max_series = self.spectra[0].energies.size
        self.tracked = track_states(
            self.spectra, n_series=min(max_series, n_series or 24)
        )
        self.labels = self._assign_labels()

    @property
    def anchor(self) -> int:
        """Grid index of the minimal ground-state energy (equilibrium-like)."""
        return int(np.argmin(self.tracked.energies[0]))

    def _assign_labels(self) -> dict[str, int]:
        a = self.anchor
        order = np.argsort(self.tracked.energies[:, a], kind="stable")
        ground = int(order[0])
        labels = {"S0": ground}
        n_s = n_t = 0
        for j in order[1:]:
            if int(j) in self.tracked.lost:
                continue
            cls = classify_state(float(np.mean(self.tracked.s2[j])))
            if cls == "singlet" and n_s < 4:
                n_s += 1
                labels[f"S{n_s}"] = int(j)
            elif cls == "triplet" and n_t < 4:
                n_t += 1
                labels[f"T{n_t}"] = int(j)
        return labels

    def ground_states(self) -> np.ndarray:
        """Phase-fixed full-space ground states, shape (M, 2^n)."""
        j = self.labels["S0"]
        dim = 1 << self.spectra[0].n_qubits
        out = np.zeros((len(self.spectra), dim), dtype=complex)
        for g, sp in enumerate(self.spectra):
            vec = fix_phase(self.tracked.vectors[g][:, j])
            out[g, sp.sector_indices] = vec
        return out

    def energy_series(self, label: str) -> TargetSeries:
        j = self._series(label)
        g0 = self.labels["S0"]
        vals = self.tracked.energies[j] - self.tracked.energies[g0]
        return self._series_obj("transition_energy", label, vals, j)

    def tdm_series(self, label: str) -> TargetSeries:
        j = self._series(label)
        g0 = self.labels["S0"]
        vals = np.zeros(len(self.spectra))
        for g in range(len(self.spectra)):
            v0 = fix_phase(self.tracked.vectors[g][:, g0])
            vj = fix_phase(self.tracked.vectors[g][:, j])
            comps = [np.vdot(vj, m @ v0) for m in self._mu_mats[g]]
            vals[g] = np.sqrt(sum(abs(c) ** 2 for c in comps))
        return self._series_obj("tdm_norm", label, vals, j)

    def _series(self, label: str) -> int:
        if label not in self.labels:
            raise KeyError(f"no tracked state labeled {label!r}; have {sorted(self.labels)}")
        return self.labels[label]

    def _series_obj(self, kind: str, label: str, vals: np.ndarray, j: int) -> TargetSeries:
        flagged = self.tracked.flags.get(j, [])
        valid = np.ones(vals.size, dtype=bool)
        for g in flagged:
            valid[max(0, g - 1):g + 1] = False
        return TargetSeries(kind=kind, label=label, grid=self.tracked.grid.copy(),
                            values=vals, valid=valid, flagged_steps=list(flagged))

    def available_targets(self, tdm_floor: float = 1e-4) -> list[tuple[str, str]]:
        """(kind, label) pairs that are unflagged (and, for TDMs, non-zero)."""
        out = []
        for label in sorted(self.labels):
            if label == "S0":
                continue
            j = self.labels[label]
            if self.tracked.flagged(j):
                continue
            out.append(("transition_energy", label))
            if self.tdm_series(label).max_value() > tdm_floor:
                out.append(("tdm_norm", label))
        return out

    def dataset(self, kind: str, label: str, allow_flagged: bool = False) -> Dataset:
        series = (self.energy_series(label) if kind == "transition_energy"
                  else self.tdm_series(label))
        if series.flagged_steps and not allow_flagged:
            raise ValueError(
                f"{label} is flagged for avoided crossings at steps {series.flagged_steps}; "
                "use a reduced-range bundle or allow_flagged=True"
            )
        y = series.values
        r = series.grid
        return Dataset(
            molecule=self.bundle.molecule, kind=kind, label=label,
            states=self.ground_states(), r=r, y=y,
            scaling=Scaling(float(r.min()), float(r.max()), float(y.min()), float(y.max())),
        )
