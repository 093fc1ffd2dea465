"""Per-mode sensitivity systems for periodic convection-diffusion.

A Fourier transform of the transport-diffusion equation with z-dependent
convection a(z) and diffusion b(z) decouples into 2x2 mode systems for
(u_k, d_z u_k) and 3x3 systems for (u_k, d_z u_k, d_zz u_k).  Both are lower
triangular with the k-fold eigenvalue lambda_k = b + i a / k and become
defective exactly where the z-derivatives of lambda_k do not vanish, so the
adapted-norm machinery delivers per-mode envelopes whose constants stay
bounded in the non-defective limits; Parseval's identity lifts them to the
global bound with rate 2 b0 = 2 inf b.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .jordan import JordanBlock, structure_from_chains
from .linalg import expm
from .lyapunov import (
    DecayEnvelope,
    ModeEnvelope,
    build_form,
    decay_constant,
    sup_poly_exp,
    w_vector,
)

__all__ = [
    "CoefficientField",
    "SpectralState",
    "coefficient_field",
    "tabulated_coefficient_field",
    "tanh_field",
    "trig_field",
    "lambda_k",
    "first_order_system",
    "first_order_envelope",
    "second_order_system",
    "second_order_envelope",
    "tilde_w3_vector",
    "second_order_tilde_p",
    "lemma_tilde_p3_coefficient",
    "evolve_spectrum",
    "fourier_coefficients",
    "synthesize",
    "gaussian_bump_state",
    "deviation_norm_sq",
    "theorem_bound_check",
]

#: |dlambda| below this (relative) threshold selects the non-defective branch;
#: the envelopes are continuous across it, so the cut is harmless.
DEFECT_THRESHOLD = 1e-10

#: fold factor for (1 + x) <= kappa (1 + x^2), x >= 0
_KAPPA_12 = (1.0 + np.sqrt(2.0)) / 2.0


@dataclass(frozen=True)
class CoefficientField:
    """Convection/diffusion coefficients and their z-derivatives.

    ``b0`` is a positive lower bound of b; the ``sup_*`` fields are sup-norm
    bounds of the derivative functions and enter the uniform constants.
    """

    a: Callable[[float], float]
    b: Callable[[float], float]
    da: Callable[[float], float]
    db: Callable[[float], float]
    b0: float
    sup_da: float
    sup_db: float
    d2a: Callable[[float], float] | None = None
    d2b: Callable[[float], float] | None = None
    sup_d2a: float = 0.0
    sup_d2b: float = 0.0

    def __post_init__(self):
        if self.b0 <= 0:
            raise ValueError("b0 must be positive")

    def validate_on(self, z_grid) -> None:
        for z in np.asarray(z_grid, dtype=float):
            if self.b(z) < self.b0 * (1.0 - 1e-12):
                raise ValueError(f"b({z}) < b0")
            if abs(self.da(z)) > self.sup_da * (1.0 + 1e-9) + 1e-12:
                raise ValueError(f"|da({z})| exceeds sup_da")
            if abs(self.db(z)) > self.sup_db * (1.0 + 1e-9) + 1e-12:
                raise ValueError(f"|db({z})| exceeds sup_db")


def coefficient_field(a, b, da, db, b0, sup_da, sup_db, **second_order) -> CoefficientField:
    return CoefficientField(a=a, b=b, da=da, db=db, b0=b0, sup_da=sup_da, sup_db=sup_db, **second_order)


def tabulated_coefficient_field(z, a, b, da, db, d2a=None, d2b=None, b0=None) -> CoefficientField:
    """Field built from sample arrays by linear interpolation."""
    z = np.asarray(z, dtype=float)

    def interp(table):
        table = np.asarray(table, dtype=float)
        return lambda zz: float(np.interp(zz, z, table))

    return CoefficientField(
        a=interp(a),
        b=interp(b),
        da=interp(da),
        db=interp(db),
        d2a=interp(d2a) if d2a is not None else None,
        d2b=interp(d2b) if d2b is not None else None,
        b0=float(np.min(b)) if b0 is None else float(b0),
        sup_da=float(np.max(np.abs(da))),
        sup_db=float(np.max(np.abs(db))),
        sup_d2a=float(np.max(np.abs(d2a))) if d2a is not None else 0.0,
        sup_d2b=float(np.max(np.abs(d2b))) if d2b is not None else 0.0,
    )


def tanh_field() -> CoefficientField:
    """a(z) = z, b(z) = 2 + tanh z; first-order test field (b0 = 1)."""
    return CoefficientField(
        a=lambda z: z,
        b=lambda z: 2.0 + np.tanh(z),
        da=lambda z: 1.0,
        db=lambda z: 1.0 / np.cosh(z) ** 2,
        d2a=lambda z: 0.0,
        d2b=lambda z: -2.0 * np.tanh(z) / np.cosh(z) ** 2,
        b0=1.0,
        sup_da=1.0,
        sup_db=1.0,
        sup_d2a=0.0,
        sup_d2b=4.0 / (3.0 * np.sqrt(3.0)),
    )


def trig_field() -> CoefficientField:
    """a(z) = cos z, b(z) = 2 + sin^2 z; both dlambda derivatives vanish at z = 0
    while the second derivatives stay order one (defect-collapse witness)."""
    return CoefficientField(
        a=np.cos,
        b=lambda z: 2.0 + np.sin(z) ** 2,
        da=lambda z: -np.sin(z),
        db=lambda z: np.sin(2.0 * z),
        d2a=lambda z: -np.cos(z),
        d2b=lambda z: 2.0 * np.cos(2.0 * z),
        b0=2.0,
        sup_da=1.0,
        sup_db=1.0,
        sup_d2a=1.0,
        sup_d2b=2.0,
    )


def lambda_k(field: CoefficientField, k: int, z: float):
    """Mode eigenvalue lambda_k = b + i a / k and its first two z-derivatives."""
    if k == 0:
        raise ValueError("the k = 0 mode is conserved and carries no rate")
    lam = field.b(z) + 1j * field.a(z) / k
    dlam = field.db(z) + 1j * field.da(z) / k
    if field.d2a is None or field.d2b is None:
        d2lam = None
    else:
        d2lam = field.d2b(z) + 1j * field.d2a(z) / k
    return lam, dlam, d2lam


def first_order_system(field: CoefficientField, k: int, z: float) -> np.ndarray:
    """Full mode matrix k^2 [[lam, 0], [dlam, lam]] for (u_k, v_k)."""
    lam, dlam, _ = lambda_k(field, k, z)
    return k * k * np.array([[lam, 0.0], [dlam, lam]], dtype=complex)


def _is_defective(dval: complex, lam: complex) -> bool:
    return abs(dval) > DEFECT_THRESHOLD * (1.0 + abs(lam))


def first_order_envelope(field: CoefficientField, k: int, z: float) -> ModeEnvelope:
    """Per-mode bound: exact exponential when dlambda = 0, else
    12 max{2, 1+|dlam|^2} (1 + k^4 t^2) e^{-2 k^2 b t}."""
    lam, dlam, _ = lambda_k(field, k, z)
    b = lam.real
    if not _is_defective(dlam, lam):
        return ModeEnvelope(DecayEnvelope(1.0, b, 1), tscale=k * k, exact=True)
    v0 = np.array([1.0, 0.0], dtype=complex)
    v1 = np.array([0.0, 1.0 / np.conj(dlam)], dtype=complex)
    st = structure_from_chains([(lam, [v0, v1])])
    form = build_form(st, block_weights={0: np.array([1.0, abs(dlam) ** 2])})
    env = decay_constant(st, form)
    return ModeEnvelope(env, tscale=k * k, meta={"dlam": dlam})


def second_order_system(field: CoefficientField, k: int, z: float) -> np.ndarray:
    lam, dlam, d2lam = lambda_k(field, k, z)
    if d2lam is None:
        raise ValueError("second derivatives of the coefficients are required")
    return k * k * np.array(
        [[lam, 0, 0], [dlam, lam, 0], [d2lam, 2.0 * dlam, lam]], dtype=complex
    )


def _second_order_chains(lam, dlam, d2lam):
    """Adjoint chain of the 3x3 mode matrix in the fully defective case."""
    dl = np.conj(dlam)
    d2l = np.conj(d2lam)
    v0 = np.array([1, 0, 0], dtype=complex)
    v1 = np.array([0, 1.0 / dl, 0], dtype=complex)
    v2 = np.array([0, -d2l / (2.0 * dl**3), 1.0 / (2.0 * dl**2)], dtype=complex)
    return v0, v1, v2


def second_order_envelope(field: CoefficientField, k: int, z: float) -> ModeEnvelope:
    """Per-mode bound for the 3x3 sensitivity system.

    dlam = d2lam = 0: exact exponential.  dlam = 0, d2lam != 0 (defect one):
    12 max{2, 1+|d2lam|^2} (1 + k^4 t^2) e^{-2 k^2 b t}.  dlam != 0 (defect
    two): [1 + (12 + 585 (1+|d2lam|^2)) max{1, |dlam|^4}] (1 + k^8 t^4)
    e^{-2 k^2 b t}; this constant stays bounded as dlam -> 0 with d2lam
    fixed, which the fixed-ladder route does not achieve.
    """
    lam, dlam, d2lam = lambda_k(field, k, z)
    if d2lam is None:
        raise ValueError("second derivatives of the coefficients are required")
    b = lam.real
    defective_1 = _is_defective(dlam, lam)
    defective_2 = _is_defective(d2lam, lam)
    if not defective_1 and not defective_2:
        return ModeEnvelope(DecayEnvelope(1.0, b, 1), tscale=k * k, exact=True)
    if not defective_1:
        v0 = np.array([1, 0, 0], dtype=complex)
        v1 = np.array([0, 0, 1.0 / np.conj(d2lam)], dtype=complex)
        w0 = np.array([0, 1, 0], dtype=complex)
        st = structure_from_chains([(lam, [v0, v1]), (lam, [w0])])
        form = build_form(st, block_weights={0: np.array([1.0, abs(d2lam) ** 2])})
        env = decay_constant(st, form)
        return ModeEnvelope(env, tscale=k * k, meta={"case": 2, "d2lam": d2lam})
    c = 1.0 + (12.0 + 585.0 * (1.0 + abs(d2lam) ** 2)) * max(1.0, abs(dlam) ** 4)
    return ModeEnvelope(
        DecayEnvelope(c, b, 3), tscale=k * k, meta={"case": 3, "dlam": dlam, "d2lam": d2lam}
    )


def tilde_w3_vector(field: CoefficientField, k: int, z: float, t: float) -> np.ndarray:
    """Replacement top vector w~3(t) = w3(t) + (d2lam~ / 2 dlam~^2) w2(t).

    Time is the rescaled mode time (pair with solutions at k^2 t).  At t = 0
    the vector is (0, 0, 1/(2 dlam~^2)), which removes the third chain
    vector's dlam^-3 blow-up from the quadratic form.
    """
    lam, dlam, d2lam = lambda_k(field, k, z)
    if not _is_defective(dlam, lam):
        raise ValueError("the replacement vector requires dlambda != 0")
    block = JordanBlock(eigenvalue=lam, chain=np.array(_second_order_chains(lam, dlam, d2lam)))
    coef = np.conj(d2lam) / (2.0 * np.conj(dlam) ** 2)
    return w_vector(block, 3, t) + coef * w_vector(block, 2, t)


def second_order_tilde_p(field: CoefficientField, k: int, z: float, t: float) -> np.ndarray:
    """P~_k(z, t) = P^1(t) + |dlam|^2 P^2(t) + 4 |dlam|^4 w~3(t) (x) w~3(t).

    Equals the identity at t = 0.  Time is the rescaled mode time.
    """
    lam, dlam, d2lam = lambda_k(field, k, z)
    if not _is_defective(dlam, lam):
        raise ValueError("requires dlambda != 0")
    block = JordanBlock(eigenvalue=lam, chain=np.array(_second_order_chains(lam, dlam, d2lam)))
    w1 = w_vector(block, 1, t)
    w2 = w_vector(block, 2, t)
    w3t = tilde_w3_vector(field, k, z, t)
    p = (
        np.outer(w1, w1.conj())
        + abs(dlam) ** 2 * np.outer(w2, w2.conj())
        + 4.0 * abs(dlam) ** 4 * np.outer(w3t, w3t.conj())
    )
    return 0.5 * (p + p.conj().T)


def lemma_tilde_p3_coefficient(field: CoefficientField, k: int, z: float) -> float:
    """Coefficient 146.25 (1+|d2lam|^2)/min{1, |dlam|^4} of the w~3 semi-norm
    bound with algebraic factor (1 + k^8 t^4)."""
    lam, dlam, d2lam = lambda_k(field, k, z)
    if not _is_defective(dlam, lam):
        raise ValueError("requires dlambda != 0")
    return 146.25 * (1.0 + abs(d2lam) ** 2) / min(1.0, abs(dlam) ** 4)


@dataclass(frozen=True)
class SpectralState:
    """Truncated Fourier coefficients of (u, v[, w]) at one parameter value.

    ``coeffs`` has shape (2K+1, order+1); row j holds mode k = j - K.  The
    conserved normalization u_0 = 1, v_0 = w_0 = 0 is enforced exactly.
    """

    K: int
    order: int
    coeffs: np.ndarray
    z: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.K + 1, self.order + 1):
            raise ValueError(f"coeffs must have shape {(2 * self.K + 1, self.order + 1)}")
        zero = c[self.K]
        if abs(zero[0] - 1.0) > 1e-12 or np.any(np.abs(zero[1:]) > 1e-12):
            raise ValueError("state is not normalized (u_0 = 1 and zero-mass sensitivities)")
        object.__setattr__(self, "coeffs", c)

    def mode(self, k: int) -> np.ndarray:
        return self.coeffs[k + self.K]


def fourier_coefficients(samples, K: int) -> np.ndarray:
    """Coefficients c_k = (1/N) sum_j f(x_j) exp(-i k x_j), k = -K..K.

    Plain quadrature on the uniform 2 pi grid (exact below the Nyquist mode
    of the sample grid); no FFT machinery involved.
    """
    f = np.asarray(samples, dtype=complex)
    n = f.size
    if n <= 2 * K:
        raise ValueError("need more than 2K samples")
    x = 2.0 * np.pi * np.arange(n) / n
    ks = np.arange(-K, K + 1)
    return np.exp(-1j * np.outer(ks, x)) @ f / n


def synthesize(coeffs_k, x) -> np.ndarray:
    """Evaluate sum_k c_k exp(i k x) for coefficients indexed k = -K..K."""
    c = np.asarray(coeffs_k, dtype=complex)
    K = (c.size - 1) // 2
    x = np.asarray(x, dtype=float)
    ks = np.arange(-K, K + 1)
    return np.exp(1j * np.outer(x, ks)) @ c


def gaussian_bump_state(
    K: int, order: int = 1, gamma: float = 2.0, amp: float = 0.5, v_amp: float = 0.0, z: float = 0.0
) -> SpectralState:
    """Normalized state u = 1 + amp * (periodic Gaussian bump - mean).

    Optional ``v_amp`` seeds the first sensitivity with a shifted copy of the
    bump (zero mean, so the mass constraints stay exact).
    """
    n = max(512, 8 * K)
    x = 2.0 * np.pi * np.arange(n) / n
    bump = np.exp(gamma * (np.cos(x) - 1.0))
    c = fourier_coefficients(bump, K)
    coeffs = np.zeros((2 * K + 1, order + 1), dtype=complex)
    coeffs[:, 0] = amp * c
    coeffs[K, 0] = 1.0
    if v_amp:
        shifted = np.exp(gamma * (np.cos(x - 1.0) - 1.0))
        cv = fourier_coefficients(shifted, K)
        coeffs[:, 1] = v_amp * cv
        coeffs[K, 1] = 0.0
    return SpectralState(K=K, order=order, coeffs=coeffs, z=z)


def _mode_matrix(field: CoefficientField, k: int, z: float, order: int) -> np.ndarray:
    return first_order_system(field, k, z) if order == 1 else second_order_system(field, k, z)


def evolve_spectrum(field: CoefficientField, state: SpectralState, z: float, t: float) -> SpectralState:
    """Exact propagation of every mode by the matrix exponential.

    The k = 0 mode is pinned to its conserved value; no time stepping is
    involved, so calls for different t are independent.
    """
    out = np.array(state.coeffs, copy=True)
    for k in range(-state.K, state.K + 1):
        if k == 0:
            continue
        m = _mode_matrix(field, k, z, state.order)
        out[k + state.K] = expm(-m, t) @ state.coeffs[k + state.K]
    return SpectralState(K=state.K, order=state.order, coeffs=out, z=z)


def deviation_norm_sq(state: SpectralState) -> float:
    """Squared distance to the steady state (1, 0[, 0]) via Parseval,
    normalized as sum_k |y_k|^2 / (2 pi)."""
    dev = np.array(state.coeffs, copy=True)
    dev[state.K, 0] -= 1.0
    return float(np.sum(np.abs(dev) ** 2) / (2.0 * np.pi))


def assembled_constants(field: CoefficientField, order: int) -> dict:
    """Uniform mode constant and k-folding factor for the global bound."""
    if order == 1:
        sup_dlam_sq = field.sup_da**2 + field.sup_db**2
        mode_const = 12.0 * max(2.0, 1.0 + sup_dlam_sq)
        fold = sup_poly_exp(2, 2.0 * field.b0)
        return {
            "mode_const": mode_const,
            "fold_const": fold,
            "C_global": mode_const * fold,
            "b0": field.b0,
        }
    s1_sq = field.sup_da**2 + field.sup_db**2
    s2_sq = field.sup_d2a**2 + field.sup_d2b**2
    case2 = 12.0 * max(2.0, 1.0 + s2_sq)
    case3 = 1.0 + (12.0 + 585.0 * (1.0 + s2_sq)) * max(1.0, s1_sq) ** 2
    mode_const = max(1.0, _KAPPA_12 * case2, case3)
    fold = sup_poly_exp(4, 2.0 * field.b0)
    return {
        "mode_const": mode_const,
        "fold_const": fold,
        "C_global": mode_const * fold,
        "case2_const": case2,
        "case3_const": case3,
        "b0": field.b0,
    }


def theorem_bound_check(
    field: CoefficientField,
    initial_state_fn: Callable[[float], SpectralState],
    z_grid,
    t_grid,
    order: int = 1,
) -> dict:
    """Verify the global sensitivity bound on a (z, t) grid.

    Checks  sup_z ||y(., z, t) - y_inf||^2 <= C (1 + t^(2 order)) e^{-2 b0 t}
    times the supremum of the initial deviation, with C assembled from the
    uniform mode constant and the k-folding factor.  Returns the full ratio
    table plus the constants; ``passed`` means no ratio exceeded 1 + 1e-9.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    field.validate_on(z_grid)
    consts = assembled_constants(field, order)
    states0 = [initial_state_fn(z) for z in z_grid]
    initial = np.array([deviation_norm_sq(s) for s in states0])
    initial_sup = float(np.max(initial))
    norm_sq = np.empty((z_grid.size, t_grid.size))
    for i, (z, s0) in enumerate(zip(z_grid, states0)):
        for j, t in enumerate(t_grid):
            norm_sq[i, j] = deviation_norm_sq(evolve_spectrum(field, s0, z, t))
    q = 2 * order
    bound = consts["C_global"] * (1.0 + t_grid**q) * np.exp(-2.0 * field.b0 * t_grid) * initial_sup
    ratio = norm_sq / bound[None, :]
    tail = max(
        float(np.sum(np.abs(s.coeffs[[0, 1, -2, -1], :]) ** 2) / (2.0 * np.pi)) for s in states0
    )
    tail_fraction = tail / initial_sup if initial_sup > 0 else 0.0
    return {
        "order": order,
        "z_grid": z_grid,
        "t_grid": t_grid,
        "norm_sq": norm_sq,
        "bound": bound,
        "ratio": ratio,
        "max_ratio": float(np.max(ratio)),
        "passed": bool(np.max(ratio) <= 1.0 + 1e-9),
        "constants": consts,
        "initial_sup": initial_sup,
        "tail_fraction": tail_fraction,
        "tail_warning": bool(tail_fraction > 1e-8),
    }
