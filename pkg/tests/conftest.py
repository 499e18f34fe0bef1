import numpy as np
import pytest

from cktlab.polyharm import HPoly, monomials


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_hpoly(rng, n, m, real=False):
    coeffs = {}
    for a in monomials(n, m):
        c = rng.standard_normal()
        if not real:
            c = c + 1j * rng.standard_normal()
        coeffs[a] = c
    return HPoly(n, m, coeffs)


def random_skew_hermitian(rng, r, tracefree=False):
    M = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    S = (M - M.conj().T) / 2
    if tracefree:
        S = S - np.trace(S) / r * np.eye(r)
    return S
