"""Shared fixtures: canonical matrices and a structured random-matrix factory."""

import numpy as np
import pytest

from lyapdecay.jordan import structure_from_chains


def geometry_matrix() -> np.ndarray:
    """2x2 fixture with defective gap eigenvalue 1/2 and known adapted form."""
    return np.array([[1.0, 0.5], [-0.5, 0.0]], dtype=complex)


def defect1_matrix(eps: float) -> np.ndarray:
    """Upper-triangular defect-one family: identity plus eps in the corner."""
    return np.array([[1.0, eps], [0.0, 1.0]], dtype=complex)


@pytest.fixture
def geo():
    return geometry_matrix()


def _partition(rng, d, max_len=3):
    lengths = []
    rest = d
    while rest:
        l = int(rng.integers(1, min(max_len, rest) + 1))
        lengths.append(l)
        rest -= l
    return lengths


def random_structured_matrix(rng, d=None, all_gap=False):
    """Positive stable matrix with prescribed Jordan data.

    Blocks are planted through a well-conditioned conjugation, eigenvalues
    are kept >= 0.3 apart, and at least one block sits exactly at the gap.
    Occasionally two blocks share an eigenvalue (multi-block cluster).
    Returns (C, blocks) with blocks = [(eigenvalue, length), ...].
    """
    d = int(d if d is not None else rng.integers(2, 6))
    lengths = _partition(rng, d)
    mu = 0.3 + float(rng.uniform(0.0, 0.7))
    eigs = []
    ims = []

    def fresh_im():
        while True:
            im = float(rng.uniform(-2.0, 2.0))
            if all(abs(im - other) >= 0.35 for other in ims):
                ims.append(im)
                return im

    n_gap = 1 + int(rng.uniform() < 0.5 and len(lengths) > 1)
    for i, _ in enumerate(lengths):
        if all_gap or i < n_gap:
            eigs.append(complex(mu, fresh_im()))
        else:
            eigs.append(complex(mu + 0.4 + float(rng.uniform(0.0, 1.2)), fresh_im()))
    if not all_gap and len(lengths) >= 2 and rng.uniform() < 0.3:
        # plant a same-eigenvalue cluster made of two blocks
        eigs[1] = eigs[0]
    j = np.zeros((d, d), dtype=complex)
    pos = 0
    for lam, l in zip(eigs, lengths):
        j[pos : pos + l, pos : pos + l] = np.conj(lam) * np.eye(l)
        for k in range(l - 1):
            j[pos + k, pos + k + 1] = 1.0
        pos += l

    def haar(n):
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        q, r = np.linalg.qr(g)
        return q * (np.diag(r) / np.abs(np.diag(r)))

    v = haar(d) @ np.diag(rng.uniform(0.6, 1.6, size=d)) @ haar(d)
    ch = v @ j @ np.linalg.inv(v)
    return ch.conj().T, list(zip(eigs, lengths))


def analytic_gap_structure():
    """Small all-gap structure with a planted chain, for identity tests."""
    v0 = np.array([1.0, 1.0, 0.0], dtype=complex) / np.sqrt(2)
    v1 = np.array([0.5, -0.5, 0.3], dtype=complex)
    w0 = np.array([0.2, 0.1, 1.0], dtype=complex)
    lam = 0.8 + 0.5j
    lam2 = 0.8 - 0.3j
    st = structure_from_chains([(lam, [v0, v1]), (lam2, [w0])])
    # reconstruct the matrix that has exactly these adjoint chains
    vmat = st.chain_matrix
    jmat = st.block_diagonal_jordan()
    ch = vmat @ jmat @ np.linalg.inv(vmat)
    return ch.conj().T, st
