import numpy as np
import pytest

from lyapdecay.jordan import jordan_chains
from lyapdecay.linalg import expm, spectral_norm
from lyapdecay.lyapunov import DecayEnvelope, build_form, decay_constant
from lyapdecay.oracle import (
    check_dominance,
    duhamel_mode_bound,
    duhamel_solve,
    nilpotent2_propagator_sq,
    propagator_curve,
    propagator_lognorm,
    sharpness_order,
)

from conftest import defect1_matrix, geometry_matrix


def test_propagator_curve_defect1_value():
    c = defect1_matrix(1.0)
    got = propagator_curve(c, [1.0])[0]
    want = np.exp(-2.0) * (1.5 + np.sqrt(5.0) / 2.0)
    assert got == pytest.approx(want, rel=1e-12)


def test_propagator_curve_scalar_rate():
    mu = 0.8
    c = mu * np.eye(3)
    ts = np.linspace(0.0, 10.0, 11)
    np.testing.assert_allclose(propagator_curve(c, ts), np.exp(-2 * mu * ts), rtol=1e-12)


def test_geometry_solution_swings_to_eigendirection():
    # x(t) = e^{-t/2} (6 - 6t, 6 + 6t): at t = 1 the first component vanishes
    c = geometry_matrix()
    x1 = expm(-c, 1.0) @ np.array([6.0, 6.0])
    np.testing.assert_allclose(x1, np.exp(-0.5) * np.array([0.0, 12.0]), atol=1e-12)
    assert np.vdot(x1, x1).real == pytest.approx(np.exp(-1.0) * 144.0, rel=1e-12)


def test_propagator_lognorm_matches_direct():
    c = geometry_matrix()
    for t in (0.0, 2.0, 17.3):
        direct = np.log(spectral_norm(expm(-c, t)))
        assert propagator_lognorm(c, t) == pytest.approx(direct, abs=1e-10)


def test_propagator_lognorm_beyond_underflow():
    c = np.eye(2) * 1.0
    val = propagator_lognorm(c, 2000.0)  # exp(-2000) underflows but the log must not
    assert val == pytest.approx(-2000.0, rel=1e-10)


@pytest.mark.parametrize("eps", [0.0, 0.1, 1.0, 10.0])
def test_check_dominance_defect1_family(eps):
    c = defect1_matrix(eps)
    st = jordan_chains(c)
    if eps == 0.0:
        env = decay_constant(st, build_form(st))
        assert env.C_const == pytest.approx(1.0)
    else:
        form = build_form(st, block_weights={0: np.array([1.0, eps * eps])})
        env = decay_constant(st, form)
        assert env.C_const == pytest.approx(12 * max(2, 1 + eps**2))
    rep = check_dominance(c, env, np.linspace(0.0, 50.0, 120))
    assert rep.dominated


def test_check_dominance_exact_exponential_has_unit_ratio():
    c = 0.7 * np.eye(2)
    rep = check_dominance(c, DecayEnvelope(1.0, 0.7, 1), np.linspace(0, 20, 40))
    assert rep.dominated
    assert rep.max_ratio == pytest.approx(1.0, abs=1e-10)


def test_check_dominance_refined_defect1_is_tight():
    # the refined bound 2 e^{-2t}(1 + (eps t)^2) dominates the exact
    # propagator with peak ratio exactly 2/3
    eps = 1.0
    c = defect1_matrix(eps)
    bound = lambda t: 2.0 * np.exp(-2.0 * t) * (1.0 + (eps * t) ** 2)
    rep = check_dominance(c, bound, np.linspace(0.0, 20.0, 400))
    assert rep.dominated
    assert 0.6 <= rep.max_ratio <= 2.0 / 3.0 + 1e-6


def test_check_dominance_flags_violations():
    c = geometry_matrix()
    rep = check_dominance(c, DecayEnvelope(24.0, 0.5, 1), np.linspace(0.0, 50.0, 100))
    assert not rep.dominated and rep.max_ratio > 1.0


def test_nilpotent2_closed_form_matches_expm():
    for eps in (0.3, 2.0):
        c = defect1_matrix(eps)
        ts = np.linspace(0, 10, 21)
        np.testing.assert_allclose(
            nilpotent2_propagator_sq(1.0, eps, ts), propagator_curve(c, ts), rtol=1e-11
        )


def test_sharpness_order_geometry():
    assert sharpness_order(geometry_matrix(), 0.5) == pytest.approx(1.0, abs=0.1)


def test_sharpness_order_diagonal():
    assert sharpness_order(np.diag([1.0, 2.0]).astype(complex), 1.0) == pytest.approx(0.0, abs=0.1)


def test_sharpness_order_defect_off_gap():
    k, al = 3, 1.0
    c = k * np.array(
        [[(k - 2) / k, 0, 0], [0, 1, 0], [np.sqrt((k - 1) / k) * al, al, 1]], dtype=complex
    )
    assert sharpness_order(c, 1.0) == pytest.approx(0.0, abs=0.1)


def test_duhamel_first_order_mode_closed_form():
    # u' = -k^2 lam u, v' = -k^2 (dlam u + lam v): with u(0)=1, v(0)=0 the
    # sensitivity is v(t) = -k^2 dlam t e^{-k^2 lam t}
    k, lam, dlam = 2, 1.2 + 0.5j, 0.4 - 0.3j
    a = k * k * np.array([[lam, 0], [dlam, lam]])
    for t in (0.3, 1.5):
        y = duhamel_solve(a, np.array([1.0, 0.0]), t)
        assert y[0] == pytest.approx(np.exp(-k * k * lam * t), rel=1e-12)
        assert y[1] == pytest.approx(-k * k * dlam * t * np.exp(-k * k * lam * t), rel=1e-12)


def test_duhamel_decoupled_when_no_coupling():
    a = np.diag([1.0, 3.0]).astype(complex)
    y = duhamel_solve(a, np.array([2.0, -1.0]), 0.7)
    np.testing.assert_allclose(y, [2 * np.exp(-0.7), -np.exp(-2.1)], rtol=1e-13)


def test_duhamel_matches_expm_random_triangular():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(40):
        d = int(rng.integers(2, 5))
        a = np.tril(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        # occasionally collide diagonal entries to hit the resonant branch
        if rng.uniform() < 0.5:
            a[d - 1, d - 1] = a[0, 0]
        y0 = rng.normal(size=d) + 1j * rng.normal(size=d)
        t = rng.uniform(0.0, 3.0)
        got = duhamel_solve(a, y0, t)
        want = expm(-a, t) @ y0
        worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst < 1e-10


def test_duhamel_rejects_non_triangular():
    with pytest.raises(ValueError):
        duhamel_solve(np.array([[1.0, 1.0], [0.0, 1.0]]), np.ones(2), 1.0)


def test_duhamel_mode_bound_constant():
    assert duhamel_mode_bound(1) == pytest.approx(4.0 / 3.0)
    assert duhamel_mode_bound(3) == pytest.approx(4.0 / 3.0)
    with pytest.raises(ValueError):
        duhamel_mode_bound(0)


def test_duhamel_mode_bound_dominates_and_exceeds_one_at_zero():
    # (4/3)(1 + k^4 t^2) e^{-2 k^2 b t} vs the exact propagator, |dlam| <= 1
    b, dlam = 1.0, 0.8
    for k in (1, 2, 3):
        c = k * k * np.array([[b, 0.0], [dlam, b]], dtype=complex)
        ts = np.linspace(0.0, 10.0 / (k * k), 80)
        bound = lambda t: (4.0 / 3.0) * (1.0 + k**4 * t**2) * np.exp(-2 * k * k * b * t)
        rep = check_dominance(c, bound, ts)
        assert rep.dominated
        assert bound(0.0) == pytest.approx(4.0 / 3.0) and bound(0.0) >= 1.0


def test_sharpness_never_exceeds_block_order():
    # on fixtures with an isolated defective gap eigenvalue, the fitted
    # algebraic order must not overshoot M - 1 by more than 0.1
    import sys

    sys.path.insert(0, "tests")
    from conftest import random_structured_matrix
    from lyapdecay.jordan import jordan_chains

    rng = np.random.default_rng(61)
    checked = 0
    while checked < 4:
        c, _ = random_structured_matrix(rng, d=3)
        st = jordan_chains(c)
        if st.max_defective_block == 1:
            continue
        gap_blocks = [st.blocks[n] for n in st.defective_gap_indices]
        others = [b for n, b in enumerate(st.blocks) if n not in st.defective_gap_indices]
        if any(abs(b.eigenvalue.real - st.mu) < 0.2 for b in others):
            continue  # need the gap eigenvalue isolated
        m_hat = sharpness_order(c, st.mu)
        assert m_hat <= st.max_defective_block - 1 + 0.1
        checked += 1
