"""Closed-form references, written independently of the package code."""

from decimal import Decimal, getcontext

import numpy as np


def heat_mode(x, t, j=1, L=1.0):
    """Decaying sine mode of the Dirichlet heat equation."""
    k = j * np.pi / L
    return np.exp(-k * k * t) * np.sin(k * x)


def coupled_mode(x, t, kappa):
    """u = v for a = d = 0, b = c = kappa, sine initial data."""
    return np.exp((kappa - np.pi**2) * t) * np.sin(np.pi * x)


def phi_direct(x, t, lam, beta, t0, T):
    return np.exp(lam * beta(x)) / ((t - t0) * (T - t))


def eta_direct(x, t, lam, beta, K, t0, T):
    return (np.exp(2 * lam * K) - np.exp(lam * beta(x))) / ((t - t0) * (T - t))


def eta_decimal(x, t, lam, m, t0, T, digits=50):
    """eta for the symmetric profile beta~ = x(1-x) in 50-digit arithmetic."""
    getcontext().prec = digits
    x, t, lam, m, t0, T = (Decimal(str(v)) for v in (x, t, lam, m, t0, T))
    bt = x * (1 - x)
    K = m * Decimal("0.25")
    beta = bt + K
    return ((2 * lam * K).exp() - (lam * beta).exp()) / ((t - t0) * (T - t))


def phi_decimal(x, t, lam, m, t0, T, digits=50):
    getcontext().prec = digits
    x, t, lam, m, t0, T = (Decimal(str(v)) for v in (x, t, lam, m, t0, T))
    beta = x * (1 - x) + m * Decimal("0.25")
    return (lam * beta).exp() / ((t - t0) * (T - t))


def bisect_root(f, lo, hi, tol=1e-14):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def smoothstep(tau):
    return 6 * tau**5 - 15 * tau**4 + 10 * tau**3
