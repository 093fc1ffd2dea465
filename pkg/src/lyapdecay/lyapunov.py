"""Adapted Lyapunov norms and sharp decay envelopes.

Given the Jordan structure of C^H, each block contributes a quadratic form:

* length-1 blocks contribute a rank-one time-independent term (case 1);
* longer blocks with eigenvalue off the spectral gap contribute a
  time-independent weighted sum over the chain, with a fixed weight ladder
  in the gap distance tau (case 2);
* longer blocks at the gap contribute a time-dependent sum built from the
  polynomial vector functions w^m(t) (case 3).

The combined P(t) is Hermitian positive definite, |x(t)|^2_{P(t)} decays at
the sharp rate exp(-2 mu t), and sandwiching by the extreme eigenvalues of
P(0) yields the Euclidean envelope C (1 + t^(2(M-1))) exp(-2 mu t) with a
fully explicit constant.  A "tilde" variant treats one off-gap block with the
time-dependent construction instead, which can keep the constant bounded in
non-defective limits where the fixed case-2 ladder blows up.

The case-2 ladder is applied with its largest weight on the eigenvector and
weight one on the top generalized vector; the opposite pairing violates the
defining matrix inequality (checked in the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jordan import JordanBlock, JordanStructure, NotPositiveStableError
from .linalg import as_cmatrix, hermitian_extremes, is_hermitian

__all__ = [
    "CASE1",
    "CASE2",
    "CASE3",
    "CASE3_TILDE",
    "DecayEnvelope",
    "FormBlock",
    "ImprovedDefect1Bound",
    "LyapunovForm",
    "ModeEnvelope",
    "build_form",
    "build_p",
    "build_p_epsilon",
    "c_m_constant",
    "case2_weights",
    "decay_constant",
    "envelope_eval",
    "envelope_log_eval",
    "improved_defect1_envelope",
    "lower_bound_lemma_gap",
    "p_induced_norm",
    "p_norm_sq",
    "product_form_p",
    "suggest_case3_weights",
    "sup_poly_exp",
    "tilde_constant",
    "verify_matrix_inequality",
    "w_vector",
]

CASE1 = "case1"
CASE2 = "case2"
CASE3 = "case3"
CASE3_TILDE = "case3_tilde"

_GAP_REL_TOL = 1e-8


@dataclass(frozen=True)
class FormBlock:
    case: str
    block: JordanBlock
    weights: np.ndarray  # case1: [beta]; case2: ladder; case3: beta^1..beta^l


@dataclass(frozen=True)
class LyapunovForm:
    blocks: tuple[FormBlock, ...]
    mu: float
    dim: int

    def to_json(self) -> dict:
        return {
            "mu": self.mu,
            "dim": self.dim,
            "blocks": [
                {
                    "case": fb.case,
                    "eigenvalue": [fb.block.eigenvalue.real, fb.block.eigenvalue.imag],
                    "length": fb.block.length,
                    "weights": [float(w) for w in fb.weights],
                }
                for fb in self.blocks
            ],
        }


@dataclass(frozen=True)
class DecayEnvelope:
    """Envelope C * (1 + t^(2(M-1))) * exp(-2 mu t); the algebraic factor is 1 for M = 1."""

    C_const: float
    mu: float
    M: int

    def to_json(self) -> dict:
        return {"C_const": self.C_const, "mu": self.mu, "M": self.M}


@dataclass(frozen=True)
class ModeEnvelope:
    """A decay envelope evaluated in rescaled time, as the mode systems use.

    ``bound(t)`` equals ``envelope_eval(env, tscale * t)``, so a mode system
    dy/dt = -s C y with envelope data computed for C uses tscale = s.
    """

    env: DecayEnvelope
    tscale: float = 1.0
    exact: bool = False
    meta: dict = field(default_factory=dict)

    def bound(self, t):
        return envelope_eval(self.env, self.tscale * np.asarray(t, dtype=float))

    def log_bound(self, t):
        return envelope_log_eval(self.env, self.tscale * np.asarray(t, dtype=float))


def case2_weights(l: int, tau: float) -> np.ndarray:
    """Weight ladder b^1..b^l for an off-gap block with gap distance tau.

    b^1 = 1 and b^j = c_j tau^(2(1-j)) with c_1 = 1, c_j = 1 + c_{j-1}^2.
    Index j counts from the top of the chain downwards: b^l belongs to the
    eigenvector (see :func:`build_p`).
    """
    if l < 1:
        raise ValueError("block length must be >= 1")
    if l > 1 and tau <= 0:
        raise ValueError("tau must be positive for blocks of length > 1 (block misclassified)")
    out = np.ones(l)
    c = 1.0
    for j in range(2, l + 1):
        c = 1.0 + c * c
        out[j - 1] = c * tau ** (2 * (1 - j))
    return out


def w_vector(block: JordanBlock, m: int, t: float) -> np.ndarray:
    """w^m(t) = sum_{k=1}^m t^(m-k)/(m-k)! v(k-1), for 1 <= m <= block length."""
    if not 1 <= m <= block.length:
        raise IndexError(f"m = {m} out of range for block of length {block.length}")
    out = np.zeros(block.chain.shape[1], dtype=complex)
    fact = 1.0
    power = 1.0
    for j, k in enumerate(range(m, 0, -1)):
        # coefficient t^(m-k)/(m-k)! for the chain vector v(k-1)
        out += (power / fact) * block.chain[k - 1]
        power *= t
        fact *= j + 1
    return out


def build_form(
    structure: JordanStructure,
    block_weights: dict[int, object] | None = None,
    tilde_blocks: tuple[int, ...] = (),
    gap_rel_tol: float = _GAP_REL_TOL,
) -> LyapunovForm:
    """Assign case tags and weights to every block of a structure.

    ``block_weights`` maps block index to either a positive scalar (case 1/2
    multiplier, or a uniform case-3 weight) or a full array of per-entry
    weights (case-3 beta^1..beta^l, or an explicit case-2 ladder).  Defaults:
    case-1/2 multiplier 1 and case-3 weights all one.  Indices listed in
    ``tilde_blocks`` use the time-dependent construction even though their
    eigenvalue sits off the gap.
    """
    block_weights = block_weights or {}
    mu = structure.mu
    gap_tol = gap_rel_tol * (1.0 + abs(mu))
    fbs = []
    for n, b in enumerate(structure.blocks):
        spec = block_weights.get(n)
        at_gap = b.eigenvalue.real <= mu + gap_tol
        if n in tilde_blocks:
            if b.length < 1 or at_gap:
                raise ValueError("tilde treatment targets off-gap blocks")
            case = CASE3_TILDE
            weights = _case3_weights(spec, b.length)
        elif b.length == 1:
            case = CASE1
            weights = np.array([_scalar_weight(spec)])
        elif at_gap:
            case = CASE3
            weights = _case3_weights(spec, b.length)
        else:
            case = CASE2
            tau = 2.0 * (b.eigenvalue.real - mu)
            if isinstance(spec, (list, tuple, np.ndarray)):
                weights = np.asarray(spec, dtype=float)
                if weights.size != b.length:
                    raise ValueError("case-2 ladder must have one weight per chain vector")
            else:
                weights = _scalar_weight(spec) * case2_weights(b.length, tau)
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        fbs.append(FormBlock(case=case, block=b, weights=weights))
    return LyapunovForm(blocks=tuple(fbs), mu=mu, dim=structure.dim)


def _scalar_weight(spec) -> float:
    if spec is None:
        return 1.0
    w = float(spec)
    if w <= 0:
        raise ValueError("weights must be strictly positive")
    return w


def _case3_weights(spec, l: int) -> np.ndarray:
    if spec is None:
        return np.ones(l)
    if np.isscalar(spec):
        return float(spec) * np.ones(l)
    w = np.asarray(spec, dtype=float)
    if w.size != l:
        raise ValueError(f"expected {l} weights, got {w.size}")
    return w


def _rank_one(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def build_p(form: LyapunovForm, t: float) -> np.ndarray:
    """Evaluate P(t).  Case-1/2 contributions are time-independent."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    p = np.zeros((form.dim, form.dim), dtype=complex)
    for fb in form.blocks:
        b, w = fb.block, fb.weights
        if fb.case == CASE1:
            p += w[0] * _rank_one(b.chain[0])
        elif fb.case == CASE2:
            # ladder runs from the top of the chain down to the eigenvector
            for j in range(b.length):
                p += w[j] * _rank_one(b.chain[b.length - 1 - j])
        else:  # CASE3 / CASE3_TILDE
            for m in range(1, b.length + 1):
                p += w[m - 1] * _rank_one(w_vector(b, m, t))
    return 0.5 * (p + p.conj().T)


def product_form_p(form: LyapunovForm, t: float) -> np.ndarray:
    """P(t) as the matrix product V e^{Jt} Sigma(t) B (V e^{Jt})^H.

    Valid for forms whose off-gap blocks all have length 1 (case-2 blocks are
    time-independent in :func:`build_p` but not in this product).
    """
    cols = []
    diag = []
    for fb in form.blocks:
        if fb.case == CASE2:
            raise ValueError("product form is not available for case-2 blocks")
        b = fb.block
        decay = np.exp(-2.0 * b.eigenvalue.real * t)
        phase = np.exp(np.conj(b.eigenvalue) * t)
        for m in range(1, b.length + 1):
            cols.append(phase * w_vector(b, m, t))
            diag.append(fb.weights[m - 1] * decay)
    ve = np.column_stack(cols)
    return ve @ np.diag(diag) @ ve.conj().T


def build_p_epsilon(structure: JordanStructure, epsilon: float) -> np.ndarray:
    """Time-independent form satisfying C^H P + P C >= 2 (mu - epsilon) P.

    Gap-defective blocks receive the case-2 ladder with tau = 2 epsilon (the
    gap they would have if the target rate were lowered to mu - epsilon); all
    other blocks keep their standard construction.  Requires 0 < epsilon < mu.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if epsilon >= structure.mu:
        raise ValueError("epsilon must be below the spectral gap (degenerate rate)")
    p = np.zeros((structure.dim, structure.dim), dtype=complex)
    for n, b in enumerate(structure.blocks):
        if b.length == 1:
            p += _rank_one(b.chain[0])
            continue
        if n in structure.defective_gap_indices:
            ladder = case2_weights(b.length, 2.0 * epsilon)
        else:
            ladder = case2_weights(b.length, 2.0 * (b.eigenvalue.real - structure.mu))
        for j in range(b.length):
            p += ladder[j] * _rank_one(b.chain[b.length - 1 - j])
    return 0.5 * (p + p.conj().T)


def c_m_constant(m: int) -> float:
    """Envelope constant c_M: 1/2 for M = 1, then the closed product formula."""
    if m < 1:
        raise ValueError("M must be >= 1")
    if m == 1:
        return 0.5
    prod_odd = 1.0
    for j in range(1, m):
        prod_odd *= 4.0 * j * j - 1.0
    prod_fact = 1.0
    for j in range(2, m + 1):
        prod_fact *= sum(1.0 / (math.factorial(j - k) ** 2) for k in range(1, j + 1))
    return 2.0 ** (m - 2) * prod_odd * prod_fact


def decay_constant(structure: JordanStructure, form: LyapunovForm) -> DecayEnvelope:
    """Explicit envelope constant from the extremes of P(0) and the weights.

    M = 1: C = lambda_max / lambda_min.  M >= 2:
    C = 2 lambda_max / lambda_min * c_M * max over gap-defective blocks of
    sum_m beta^m / min_{k<=m} beta^k.
    """
    if structure.mu <= 0:
        raise NotPositiveStableError(f"mu = {structure.mu:.6g} is not positive")
    if any(fb.case == CASE3_TILDE for fb in form.blocks):
        raise ValueError("forms with tilde-treated blocks use tilde_constant")
    ext = hermitian_extremes(build_p(form, 0.0))
    if ext.lambda_min <= 0:
        raise ValueError("P(0) is not positive definite")
    m_def = structure.max_defective_block
    if m_def == 1:
        return DecayEnvelope(ext.lambda_max / ext.lambda_min, structure.mu, 1)
    factor = max(
        _weight_sum_term(form.blocks[n].weights) for n in structure.defective_gap_indices
    )
    c = 2.0 * ext.lambda_max / ext.lambda_min * c_m_constant(m_def) * factor
    return DecayEnvelope(c, structure.mu, m_def)


def _weight_sum_term(betas: np.ndarray) -> float:
    running = np.minimum.accumulate(betas)
    return float(np.sum(betas / running))


def envelope_eval(env: DecayEnvelope, t):
    """C (1 + t^(2(M-1))) exp(-2 mu t); pure exponential for M = 1."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    out = np.exp(envelope_log_eval(env, t))
    return float(out) if out.ndim == 0 else out


def envelope_log_eval(env: DecayEnvelope, t):
    """log of the envelope, stable for large t (no overflow in t^(2(M-1)))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    log_alg = np.zeros_like(t)
    if env.M > 1:
        q = 2 * (env.M - 1)
        with np.errstate(divide="ignore"):
            logt = np.where(t > 0, np.log(np.where(t > 0, t, 1.0)), -np.inf)
        small = t <= 1.0
        log_alg = np.where(
            small,
            np.log1p(np.where(small, t, 0.0) ** q),
            q * logt + np.log1p(np.exp(-q * np.where(small, 1.0, logt))),
        )
    return np.log(env.C_const) + log_alg - 2.0 * env.mu * t


def verify_matrix_inequality(c, p, rate: float) -> float:
    """Smallest eigenvalue of C^H P + P C - 2 rate P (P must be Hermitian)."""
    cm = as_cmatrix(c)
    pm = as_cmatrix(p)
    if not is_hermitian(pm, rel_tol=1e-10):
        raise ValueError("P must be Hermitian")
    q = cm.conj().T @ pm + pm @ cm - 2.0 * rate * pm
    return float(np.linalg.eigvalsh(0.5 * (q + q.conj().T))[0])


def lower_bound_lemma_gap(vectors, xis, theta: float, t: float, x) -> float:
    """Slack of the lower bound for a polynomial-combination rank-one norm.

    ``vectors`` holds v^1..v^m as rows; ``xis`` holds the matching polynomial
    coefficient sequences (low order first), the last of which must be a
    positive constant.  With w(t) = sum_k xi^k(t) v^k the returned value is

        |x|^2_{w(t) (x) w(t)}
          - (1-theta) (xi^m)^2 |x|^2_{Q^m}
          + ((m-1)^2/theta - 1) sum_{k<m} xi^k(t)^2 |x|^2_{Q^k},

    which is nonnegative for every x, theta in (0,1), t >= 0.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    v = np.atleast_2d(np.asarray(vectors, dtype=complex))
    m = v.shape[0]
    if len(xis) != m:
        raise ValueError("one polynomial per vector is required")
    vals = np.array([np.polynomial.polynomial.polyval(t, np.atleast_1d(xi)) for xi in xis])
    xi_m = vals[-1]
    if np.ndim(xis[-1]) and len(np.atleast_1d(xis[-1])) > 1:
        raise ValueError("the leading coefficient xi^m must be constant")
    if xi_m <= 0:
        raise ValueError("xi^m must be a positive constant")
    x = np.asarray(x, dtype=complex)
    proj = v @ x.conj()  # <v^k, x> up to conjugation; |.|^2 is what matters
    w_proj = np.sum(vals * proj)
    lhs = abs(w_proj) ** 2
    bound = (1.0 - theta) * xi_m**2 * abs(proj[-1]) ** 2
    if m > 1:
        bound -= ((m - 1) ** 2 / theta - 1.0) * float(
            np.sum(vals[:-1] ** 2 * np.abs(proj[:-1]) ** 2)
        )
    return float(lhs - bound)


@dataclass(frozen=True)
class ImprovedDefect1Bound:
    """Refined bound 2 (1 + ratio t^2) exp(-2 mu t) for a defect-one gap block.

    The bound controls |x(t)|^2 in the P_n(0)-norm of that block; it is a
    Euclidean bound whenever P(0) is a multiple of the identity (as for the
    weight choice that normalizes P(0) = I).
    """

    mu: float
    ratio: float  # beta^2 / beta^1

    def bound(self, t):
        t = np.asarray(t, dtype=float)
        return 2.0 * (1.0 + self.ratio * t * t) * np.exp(-2.0 * self.mu * t)


def improved_defect1_envelope(form: LyapunovForm, block_index: int) -> ImprovedDefect1Bound:
    fb = form.blocks[block_index]
    if fb.case not in (CASE3, CASE3_TILDE) or fb.block.length != 2:
        raise ValueError("refined bound requires a defect-one block in the time-dependent case")
    return ImprovedDefect1Bound(
        mu=fb.block.eigenvalue.real, ratio=float(fb.weights[1] / fb.weights[0])
    )


def tilde_constant(structure: JordanStructure, form: LyapunovForm) -> DecayEnvelope:
    """Envelope constant for a form with one tilde-treated off-gap block.

    C~ = 2 lambda_max/lambda_min * c_l * S * sum_m beta^m / min_{k<=m} beta^k,
    where l is the treated block's length and S absorbs the block's algebraic
    factor into the gap exponential (S = sup_t (1+t^(2(m-1))) e^{-2(Re lam - mu) t},
    equal to 1 whenever the rate surplus is large enough).  The remaining
    structure must have M = 1; the envelope then carries no algebraic factor.
    """
    tilde_idx = [n for n, fb in enumerate(form.blocks) if fb.case == CASE3_TILDE]
    if len(tilde_idx) != 1:
        raise ValueError("exactly one tilde-treated block is required")
    n2 = tilde_idx[0]
    if structure.max_defective_block > 1:
        raise ValueError("remaining structure must be non-defective at the gap (M = 1)")
    fb = form.blocks[n2]
    l = fb.block.length
    ext = hermitian_extremes(build_p(form, 0.0))
    if ext.lambda_min <= 0:
        raise ValueError("P(0) is not positive definite")
    if l == 1:
        # a length-one treated block is an ordinary rank-one term; the form
        # is time-independent and the plain condition-number constant applies
        return DecayEnvelope(ext.lambda_max / ext.lambda_min, structure.mu, 1)
    gap_surplus = fb.block.eigenvalue.real - structure.mu
    s_factor = max(sup_poly_exp(2 * (m - 1), 2.0 * gap_surplus) for m in range(2, l + 1))
    c = (
        2.0
        * ext.lambda_max
        / ext.lambda_min
        * c_m_constant(l)
        * s_factor
        * _weight_sum_term(fb.weights)
    )
    return DecayEnvelope(c, structure.mu, 1)


def sup_poly_exp(q: int, c: float) -> float:
    """sup over t >= 0 of (1 + t^q) exp(-c t), for integer q >= 1 and c > 0.

    The interior maximum (if any) lies in (0, q/c]; a dense scan plus golden
    section refinement reaches ~1e-12 relative accuracy.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if q < 1:
        raise ValueError("q must be >= 1")

    def f(t):
        return (1.0 + t**q) * np.exp(-c * t)

    upper = q / c
    grid = np.linspace(0.0, upper, 4097)
    vals = (1.0 + grid**q) * np.exp(-c * grid)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(200):
        if b - a < 1e-14 * (1.0 + b):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = f(x1)
    return float(max(1.0, f(0.5 * (a + b)), vals[i]))


def suggest_case3_weights(block: JordanBlock) -> np.ndarray:
    """Heuristic weights beta^m = 1 / ||v(m-1)||^2.

    For chains whose higher links scale like 1/eps^(m-1) this reproduces the
    choice that keeps P(0) well conditioned in defect-collapse limits.  It is
    a heuristic, not a guarantee.
    """
    return np.array([1.0 / float(np.linalg.norm(v) ** 2) for v in block.chain])


def p_norm_sq(x, p) -> float:
    x = np.asarray(x, dtype=complex)
    return float(np.real(x.conj() @ (as_cmatrix(p) @ x)))


def p_induced_norm(c, p) -> float:
    """Matrix norm of C induced by the P-inner product: ||P^1/2 C P^-1/2||_2."""
    pm = as_cmatrix(p)
    w, q = np.linalg.eigh(0.5 * (pm + pm.conj().T))
    if w[0] <= 0:
        raise ValueError("P must be positive definite")
    sq = q @ np.diag(np.sqrt(w)) @ q.conj().T
    inv_sq = q @ np.diag(1.0 / np.sqrt(w)) @ q.conj().T
    return float(np.linalg.norm(sq @ as_cmatrix(c) @ inv_sq, 2))
