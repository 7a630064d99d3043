"""Gaussian basis sets and molecular geometry.

Ships the published 6-31G parameters for H and Li (Hehre/Ditchfield/Pople
split-valence family); shells expand to Cartesian functions with primitive
and contracted normalization. All lengths are atomic units (bohr) internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ANGSTROM_TO_BOHR = 1.0 / 0.529177210903

# element -> list of (angular momentum letter, [(exponent, coefficient), ...])
BASIS_6_31G = {
    "H": [
        ("S", [(18.7311370, 0.03349460), (2.8253937, 0.23472695), (0.6401217, 0.81375733)]),
        ("S", [(0.1612778, 1.0)]),
    ],
    "Li": [
        ("S", [(642.418915, 0.00214260781), (96.7985153, 0.0162088715),
               (22.0911212, 0.0773155725), (6.20107025, 0.245786052),
               (1.93511768, 0.470189004), (0.636735789, 0.345470845)]),
        ("SP", [(2.32491844, -0.0350917401, 0.00894250571),
                (0.632431123, -0.191232844, 0.141009464),
                (0.0790534406, 1.08398780, 0.945363695)]),
        ("SP", [(0.0359619960, 1.0, 1.0)]),
    ],
}

ATOMIC_NUMBER = {"H": 1, "Li": 3}

# Cartesian powers per angular momentum.
_ANGULAR = {"S": [(0, 0, 0)], "P": [(1, 0, 0), (0, 1, 0), (0, 0, 1)]}


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def primitive_norm(alpha: float, powers: tuple[int, int, int]) -> float:
    i, j, k = powers
    l = i + j + k
    num = (2 * alpha / np.pi) ** 0.75 * (4 * alpha) ** (l / 2)
    den = np.sqrt(_double_factorial(2 * i - 1) * _double_factorial(2 * j - 1)
                  * _double_factorial(2 * k - 1))
    return num / den


@dataclass
class BasisFunction:
    """One contracted Cartesian Gaussian."""

    center: np.ndarray                 # (3,) bohr
    powers: tuple[int, int, int]
    exponents: np.ndarray
    coefficients: np.ndarray           # includes primitive norms; contracted-normalized

    @property
    def n_prim(self) -> int:
        return self.exponents.size


@dataclass
class Molecule:
    symbols: list[str]
    coords: np.ndarray                 # (n_atoms, 3) bohr

    @classmethod
    def from_angstrom(cls, symbols: list[str], coords_angstrom) -> "Molecule":
        return cls(symbols, np.asarray(coords_angstrom, dtype=float) * ANGSTROM_TO_BOHR)

    @property
    def charges(self) -> np.ndarray:
        return np.asarray([ATOMIC_NUMBER[s] for s in self.symbols], dtype=float)

    @property
    def n_electrons(self) -> int:
        return int(self.charges.sum())

    def nuclear_repulsion(self) -> float:
        e = 0.0
        for a in range(len(self.symbols)):
            for b in range(a):
                e += self.charges[a] * self.charges[b] / np.linalg.norm(
                    self.coords[a] - self.coords[b])
        return e

    def nuclear_dipole(self) -> np.ndarray:
        return self.charges @ self.coords


def build_basis(mol: Molecule, name: str = "6-31G") -> list[BasisFunction]:
    """Expand the shell table into contracted, normalized Cartesian functions."""
    if name != "6-31G":
        raise ValueError(f"unknown basis {name!r}")
    functions: list[BasisFunction] = []
    for symbol, center in zip(mol.symbols, mol.coords):
        for shell_kind, rows in BASIS_6_31G[symbol]:
            kinds = ["S", "P"] if shell_kind == "SP" else [shell_kind]
            for ki, kind in enumerate(kinds):
                exps = np.asarray([row[0] for row in rows])
                coeffs = np.asarray([row[1 + ki] if shell_kind == "SP" else row[1]
                                     for row in rows])
                for powers in _ANGULAR[kind]:
                    norms = np.asarray([primitive_norm(a, powers) for a in exps])
                    functions.append(BasisFunction(
                        center=np.asarray(center, dtype=float), powers=powers,
                        exponents=exps, coefficients=coeffs * norms,
                    ))
    _normalize_contracted(functions)
    return functions


def _normalize_contracted(functions: list[BasisFunction]) -> None:
    from .integrals import overlap_element

    for f in functions:
        s = overlap_element(f, f)
        f.coefficients = f.coefficients / np.sqrt(s)
