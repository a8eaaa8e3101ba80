import numpy as np
import pytest

from ris import RISModel, SpinParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def u(k, l, n=2):
    m = np.zeros((n, n), dtype=complex)
    m[k, l] = 1.0
    return m


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def spin_base(**overrides):
    """The workhorse spin model: (S, E, beta, tau) = (1, 2, 1, 1), b = c = 1."""
    kw = dict(S=1.0, E=2.0, beta=1.0, b=1.0, c=1.0, tau=1.0)
    kw.update(overrides)
    return SpinParams(**kw)


def random_two_level_model(rng, safe_gap=True):
    """Random n_S = n_E = 2 model; safe_gap keeps the Bohr gap of h_S away from 0 and pi."""
    if safe_gap:
        split = rng.uniform(0.5, 1.2)
        basis = random_unitary(rng, 2)
        h_s = basis @ np.diag([0.0, split]).astype(complex) @ basis.conj().T
    else:
        h_s = random_hermitian(rng, 2)
    h_e = random_hermitian(rng, 2)
    v = random_hermitian(rng, 4, scale=rng.uniform(0.3, 1.0))
    return RISModel(h_s=h_s, h_e=h_e, v=v, beta=float(rng.uniform(0.0, 2.0)))
