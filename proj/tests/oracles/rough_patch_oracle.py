"""Signatures of plane boundary operators carrying a rough central patch.

The lattice operator is rebuilt independently with numpy in block form
[[F, D], [D^H, -F]] (D = forward difference in x + i * forward difference in
y, zero outside the box; F diagonal from the cell-centre potential). With
invertible endpoints the relative eta of a pair is sig(A1) - sig(A0) and the
spectral flow of any path between them is half of it.

Patch values are S * g(ix, iy, k), with g a hash-based Box-Muller deviate that
the C++ tests reproduce bit for bit.

Usage: python3 rough_patch_oracle.py
"""
import numpy as np
import scipy.sparse as sp


def frac(t):
    return t - np.floor(t)


def deviate(ix, iy, k):
    u1 = frac(np.sin(ix * 12.9898 + iy * 78.233 + k * 3.7) * 43758.5453)
    u2 = frac(np.sin(ix * 39.3468 + iy * 11.135 + k * 1.3) * 24634.6345)
    return np.sqrt(-2 * np.log(max(u1, 1e-12))) * np.cos(2 * np.pi * u2)


def lattice(radius, n):
    h = 2 * radius / n
    e = np.ones(n)
    fwd = sp.diags([-e, e[:-1]], [0, 1], shape=(n, n)) / h
    eye = sp.identity(n)
    d = (sp.kron(eye, fwd) + 1j * sp.kron(fwd, eye)).toarray()
    c = -radius + (np.arange(n) + 0.5) * h
    x, y = np.meshgrid(c, c)
    return d, ((x**2 + y**2) / 2).ravel()


def signature(d, f):
    a = np.block([[np.diag(f), d], [d.conj().T, -np.diag(f)]])
    ev = np.linalg.eigvalsh(a)
    return int((ev > 0).sum() - (ev < 0).sum()), float(np.min(np.abs(ev)))


def patched(base, n, lo, hi, scale, k):
    f = base.copy()
    for ix in range(lo, hi + 1):
        for iy in range(lo, hi + 1):
            f[iy * n + ix] = scale * deviate(ix, iy, k)
    return f


def table(title, radius, n, lo, hi, scale, base_kind):
    d, bowl = lattice(radius, n)
    base = bowl if base_kind == "bowl" else np.full(n * n, float(base_kind))
    print(f"{title}: {n}x{n}, half-width {radius}, block [{lo}, {hi}], scale {scale}, base {base_kind}")
    print("  base", signature(d, base))
    for k in range(10):
        s, gap = signature(d, patched(base, n, lo, hi, scale, k))
        print(f"  k={k} sig={s:+d} min|lambda|={gap:.4f}")


if __name__ == "__main__":
    table("triples", 2.0, 16, 2, 13, 4.0, "bowl")
    table("sweep", 4.0, 17, 3, 13, 2.0, "bowl")
    table("reduction", 2.0, 16, 2, 13, 4.0, "2")
