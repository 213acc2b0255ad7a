"""Independent reference computations shared by the test modules."""
import numpy as np

from uhlmann.analytics import mixed_state


def _sqrt_rho(theta, r, M):
    w, v = np.linalg.eigh(mixed_state(theta, r, M).rho)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T, w, v


def spectral_connection(theta, r, M, h=1e-5):
    """Spectral double sum with a central-difference derivative of sqrt(rho)."""
    s, w, v = _sqrt_rho(theta, r, M)
    ds = (_sqrt_rho(theta + h, r, M)[0] - _sqrt_rho(theta - h, r, M)[0]) / (2 * h)
    comm = ds @ s - s @ ds
    A = np.zeros((2, 2), complex)
    for i in range(2):
        for j in range(2):
            den = w[i] + w[j]
            if den < 1e-14:
                continue
            Pi = np.outer(v[:, i], v[:, i].conj())
            Pj = np.outer(v[:, j], v[:, j].conj())
            A += Pi @ comm @ Pj / den
    return A
