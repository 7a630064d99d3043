"""McMurchie-Davidson one- and two-electron integrals over contracted Gaussians.

Hermite expansion coefficients E_t^{ij} and Hermite Coulomb integrals R_tuv
are generated by the standard recurrences; the Boys function comes from the
regularized incomplete gamma. Supported angular momenta cover s and p shells
(plus the raised momenta kinetic-energy integrals need).
"""

from __future__ import annotations

import numpy as np
from scipy.special import gamma, gammainc

from .basis import BasisFunction


def boys(m: int, x: float) -> float:
    if x < 1e-13:
        return 1.0 / (2 * m + 1)
    a = m + 0.5
    return gamma(a) * gammainc(a, x) / (2 * x**a)


def _e_coeff(i: int, j: int, t: int, q: float, a: float, b: float) -> float:
    """Hermite expansion coefficient for one Cartesian axis.

    q = A_x - B_x, a/b are the two exponents; valid for 0 <= t <= i + j.
    """
    p = a + b
    mu = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return float(np.exp(-mu * q * q))
    if j == 0:
        # decrement i
        return (_e_coeff(i - 1, j, t - 1, q, a, b) / (2 * p)
                - (mu * q / a) * _e_coeff(i - 1, j, t, q, a, b)
                + (t + 1) * _e_coeff(i - 1, j, t + 1, q, a, b))
    return (_e_coeff(i, j - 1, t - 1, q, a, b) / (2 * p)
            + (mu * q / b) * _e_coeff(i, j - 1, t, q, a, b)
            + (t + 1) * _e_coeff(i, j - 1, t + 1, q, a, b))


def _hermite_coulomb(t: int, u: int, v: int, n: int, p: float,
                     pc: np.ndarray, dist2: float) -> float:
    if t < 0 or u < 0 or v < 0:
        return 0.0
    if t == u == v == 0:
        return float((-2.0 * p) ** n * boys(n, p * dist2))
    if t > 0:
        return ((t - 1) * _hermite_coulomb(t - 2, u, v, n + 1, p, pc, dist2)
                + pc[0] * _hermite_coulomb(t - 1, u, v, n + 1, p, pc, dist2))
    if u > 0:
        return ((u - 1) * _hermite_coulomb(t, u - 2, v, n + 1, p, pc, dist2)
                + pc[1] * _hermite_coulomb(t, u - 1, v, n + 1, p, pc, dist2))
    return ((v - 1) * _hermite_coulomb(t, u, v - 2, n + 1, p, pc, dist2)
            + pc[2] * _hermite_coulomb(t, u, v - 1, n + 1, p, pc, dist2))


def _overlap_prim(a, la, ra, b, lb, rb) -> float:
    p = a + b
    s = (np.pi / p) ** 1.5
    for ax in range(3):
        s *= _e_coeff(la[ax], lb[ax], 0, ra[ax] - rb[ax], a, b)
    return s


def _kinetic_prim(a, la, ra, b, lb, rb) -> float:
    """<a| -1/2 nabla^2 |b> via overlaps with shifted momenta on b."""

    def s1d(ax, jb):
        lbm = list(lb)
        lbm[ax] = jb
        val = _e_coeff(la[ax], lbm[ax], 0, ra[ax] - rb[ax], a, b)
        return val

    p = a + b
    pref = (np.pi / p) ** 1.5
    total = 0.0
    for ax in range(3):
        j = lb[ax]
        term = -2.0 * b * b * s1d(ax, j + 2) + b * (2 * j + 1) * s1d(ax, j)
        if j >= 2:
            term -= 0.5 * j * (j - 1) * s1d(ax, j - 2)
        for other in range(3):
            if other != ax:
                term *= _e_coeff(la[other], lb[other], 0, ra[other] - rb[other], a, b)
        total += term
    return pref * total


def _nuclear_prim(a, la, ra, b, lb, rb, centers, charges) -> float:
    p = a + b
    pr = (a * ra + b * rb) / p
    e_list = [[_e_coeff(la[ax], lb[ax], t, ra[ax] - rb[ax], a, b)
               for t in range(la[ax] + lb[ax] + 1)] for ax in range(3)]
    total = 0.0
    for center, charge in zip(centers, charges):
        pc = pr - center
        dist2 = float(pc @ pc)
        acc = 0.0
        for t in range(la[0] + lb[0] + 1):
            for u in range(la[1] + lb[1] + 1):
                for v in range(la[2] + lb[2] + 1):
                    acc += (e_list[0][t] * e_list[1][u] * e_list[2][v]
                            * _hermite_coulomb(t, u, v, 0, p, pc, dist2))
        total += -charge * acc
    return total * 2.0 * np.pi / p


def _dipole_prim(a, la, ra, b, lb, rb, axis: int) -> float:
    """<a| x_axis |b> about the origin."""
    p = a + b
    pref = (np.pi / p) ** 1.5
    val = 1.0
    for ax in range(3):
        q = ra[ax] - rb[ax]
        e0 = _e_coeff(la[ax], lb[ax], 0, q, a, b)
        if ax == axis:
            e1 = _e_coeff(la[ax], lb[ax], 1, q, a, b)
            pcoord = (a * ra[ax] + b * rb[ax]) / p
            val *= e1 + pcoord * e0
        else:
            val *= e0
    return pref * val


def _eri_prim(a, la, ra, b, lb, rb, c, lc, rc, d, ld, rd) -> float:
    p = a + b
    q = c + d
    pr = (a * ra + b * rb) / p
    qr = (c * rc + d * rd) / q
    omega = p * q / (p + q)
    pq = pr - qr
    dist2 = float(pq @ pq)
    e_ab = [[_e_coeff(la[ax], lb[ax], t, ra[ax] - rb[ax], a, b)
             for t in range(la[ax] + lb[ax] + 1)] for ax in range(3)]
    e_cd = [[_e_coeff(lc[ax], ld[ax], t, rc[ax] - rd[ax], c, d)
             for t in range(lc[ax] + ld[ax] + 1)] for ax in range(3)]
    total = 0.0
    for t in range(la[0] + lb[0] + 1):
        for u in range(la[1] + lb[1] + 1):
            for v in range(la[2] + lb[2] + 1):
                etuv = e_ab[0][t] * e_ab[1][u] * e_ab[2][v]
                if etuv == 0.0:
                    continue
                for tt in range(lc[0] + ld[0] + 1):
                    for uu in range(lc[1] + ld[1] + 1):
                        for vv in range(lc[2] + ld[2] + 1):
                            ecd = e_cd[0][tt] * e_cd[1][uu] * e_cd[2][vv]
                            if ecd == 0.0:
                                continue
                            sign = -1.0 if (tt + uu + vv) % 2 else 1.0
                            total += etuv * ecd * sign * _hermite_coulomb(
                                t + tt, u + uu, v + vv, 0, omega, pq, dist2)
    return total * 2.0 * np.pi**2.5 / (p * q * np.sqrt(p + q))


def _contract2(fa: BasisFunction, fb: BasisFunction, prim) -> float:
    total = 0.0
    for a, ca in zip(fa.exponents, fa.coefficients):
        for b, cb in zip(fb.exponents, fb.coefficients):
            total += ca * cb * prim(a, b)
    return total


def overlap_element(fa: BasisFunction, fb: BasisFunction) -> float:
    return _contract2(fa, fb, lambda a, b: _overlap_prim(
        a, fa.powers, fa.center, b, fb.powers, fb.center))


def overlap_matrix(basis: list[BasisFunction]) -> np.ndarray:
    n = len(basis)
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s[i, j] = s[j, i] = overlap_element(basis[i], basis[j])
    return s


def cross_overlap_matrix(basis_a: list[BasisFunction],
                         basis_b: list[BasisFunction]) -> np.ndarray:
    """Overlaps between two geometries' basis sets (rows: a, cols: b)."""
    out = np.zeros((len(basis_a), len(basis_b)))
    for i, fa in enumerate(basis_a):
        for j, fb in enumerate(basis_b):
            out[i, j] = overlap_element(fa, fb)
    return out


def kinetic_matrix(basis: list[BasisFunction]) -> np.ndarray:
    n = len(basis)
    t = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            t[i, j] = t[j, i] = _contract2(basis[i], basis[j], lambda a, b: _kinetic_prim(
                a, basis[i].powers, basis[i].center, b, basis[j].powers, basis[j].center))
    return t


def nuclear_matrix(basis: list[BasisFunction], mol) -> np.ndarray:
    n = len(basis)
    v = np.zeros((n, n))
    centers = [np.asarray(c) for c in mol.coords]
    charges = mol.charges
    for i in range(n):
        for j in range(i + 1):
            v[i, j] = v[j, i] = _contract2(basis[i], basis[j], lambda a, b: _nuclear_prim(
                a, basis[i].powers, basis[i].center, b, basis[j].powers, basis[j].center,
                centers, charges))
    return v


def dipole_matrices(basis: list[BasisFunction]) -> np.ndarray:
    """(3, n, n) matrices of the position operator about the origin."""
    n = len(basis)
    out = np.zeros((3, n, n))
    for axis in range(3):
        for i in range(n):
            for j in range(i + 1):
                val = _contract2(basis[i], basis[j], lambda a, b: _dipole_prim(
                    a, basis[i].powers, basis[i].center, b, basis[j].powers,
                    basis[j].center, axis))
                out[axis, i, j] = out[axis, j, i] = val
    return out


def eri_tensor(basis: list[BasisFunction]) -> np.ndarray:
    """Chemist-ordered (ij|kl) two-electron integrals with 8-fold symmetry."""
    n = len(basis)
    eri = np.zeros((n, n, n, n))

    def pair_index(i, j):
        return i * (i + 1) // 2 + j

    for i in range(n):
        for j in range(i + 1):
            ij = pair_index(i, j)
            for k in range(n):
                for l in range(k + 1):
                    if pair_index(k, l) > ij:
                        continue
                    fa, fb, fc, fd = basis[i], basis[j], basis[k], basis[l]
                    val = 0.0
                    for a, ca in zip(fa.exponents, fa.coefficients):
                        for b, cb in zip(fb.exponents, fb.coefficients):
                            for c, cc in zip(fc.exponents, fc.coefficients):
                                for d, cd in zip(fd.exponents, fd.coefficients):
                                    val += ca * cb * cc * cd * _eri_prim(
                                        a, fa.powers, fa.center, b, fb.powers, fb.center,
                                        c, fc.powers, fc.center, d, fd.powers, fd.center)
                    for ii, jj, kk, ll in ((i, j, k, l), (j, i, k, l), (i, j, l, k),
                                           (j, i, l, k), (k, l, i, j), (l, k, i, j),
                                           (k, l, j, i), (l, k, j, i)):
                        eri[ii, jj, kk, ll] = val
    return eri
