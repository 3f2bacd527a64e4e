"""Closed-form right-hand sides built with sympy, shared by the tests."""
import numpy as np
import sympy as sp

r = sp.symbols("r", positive=True)


def flow_rhs(f_expr, z_expr, n, k2):
    f, z = f_expr, z_expr
    fp, fpp = sp.diff(f, r), sp.diff(f, r, 2)
    zp, zpp = sp.diff(z, r), sp.diff(z, r, 2)
    df = (fpp / f**2 - 2 * fp**2 / f**3 + ((n - 2) / r - 1 / (r * f**2)) * fp
          - (n - 2) * (f**2 - 1) / (r**2 * f) + k2 * f * z**2)
    dz = (zpp / f**2 + (1 / (r * f**2) + (n - 2) / r) * zp
          - ((n - 1) / (r**2 * f**2) + k2 * z**2) * z)
    return sp.lambdify(r, df, "numpy"), sp.lambdify(r, dz, "numpy")


def lambdas(f_expr):
    f = f_expr
    l1 = sp.diff(f, r) / (r * f**3)
    l2 = (1 - 1 / f**2) / r**2
    return sp.lambdify(r, l1, "numpy"), sp.lambdify(r, l2, "numpy")


def on_nodes(fn, nodes):
    return np.broadcast_to(np.asarray(fn(nodes[1:-1]), dtype=float), nodes[1:-1].shape)
