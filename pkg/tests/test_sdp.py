import numpy as np
import pytest

from dyncoh import channels as ch
from dyncoh import linalg as la
from dyncoh import measures as ms
from dyncoh import sdp as sd
from dyncoh.errors import SolverFailure, ValidationError

SQRT3_HALF = np.sqrt(3.0) / 2.0


def cfg_half():
    return ms.GameConfig(0.5, np.array([2.0 * np.pi / 3.0, 0.0]))


# ---------------------------------------------------------------------------
# Solver contract
# ---------------------------------------------------------------------------

def test_solver_rank_one_objective():
    prob = sd.SdpProblem(
        psd_variables=(("X", 2),),
        equality_constraints=((np.eye(2, dtype=complex), 1.0),),
        objective=np.diag([1.0, 0.0]).astype(complex),
    )
    sol = sd.solve_sdp(prob)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(1.0, abs=1e-7)


def test_solver_largest_eigenvalue():
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    prob = sd.SdpProblem(
        psd_variables=(("X", 2),),
        equality_constraints=((np.eye(2, dtype=complex), 1.0),),
        objective=sx,
    )
    sol = sd.solve_sdp(prob)
    assert sol.objective_value == pytest.approx(1.0, abs=1e-7)
    x = sol.variable_values["X"]
    assert la.is_hermitian(x, 1e-9)
    assert np.trace(x).real == pytest.approx(1.0, abs=1e-7)


def test_solver_complex_entry_constraints():
    # pin an off-diagonal entry and maximize its contribution elsewhere
    f = np.zeros((2, 2), dtype=complex)
    f[0, 1] = 1.0
    prob = sd.SdpProblem(
        psd_variables=(("X", 2),),
        equality_constraints=((np.eye(2, dtype=complex), 1.0), (f, 0.25 + 0.1j)),
        objective=np.diag([1.0, -1.0]).astype(complex),
    )
    sol = sd.solve_sdp(prob)
    x = sol.variable_values["X"]
    assert x[0, 1] == pytest.approx(0.25 + 0.1j, abs=1e-6)
    # max x00 - x11 subject to x00 x11 >= |x01|^2, x00 + x11 = 1
    r = abs(0.25 + 0.1j) ** 2
    expected = np.sqrt(1.0 - 4.0 * r)
    assert sol.objective_value == pytest.approx(expected, abs=1e-6)


def test_solver_detects_inconsistent_redundancy():
    f = np.zeros((2, 2), dtype=complex)
    f[0, 0] = 1.0
    g = np.zeros((2, 2), dtype=complex)
    g[1, 1] = 1.0
    with pytest.raises(SolverFailure) as err:
        sd.solve_sdp(sd.SdpProblem(
            psd_variables=(("X", 2),),
            equality_constraints=(
                (np.eye(2, dtype=complex), 1.0),
                (f, 0.7),
                (g, 0.7),  # 0.7 + 0.7 != 1: contradicts the trace constraint
            ),
            objective=np.eye(2, dtype=complex),
        ))
    assert err.value.status == "infeasible"


def test_solver_reports_unbounded_as_failure():
    # only X[0,0] is pinned; the objective grows along X[1,1]
    f = np.zeros((2, 2), dtype=complex)
    f[0, 0] = 1.0
    prob = sd.SdpProblem(
        psd_variables=(("X", 2),),
        equality_constraints=((f, 1.0),),
        objective=np.diag([0.0, 1.0]).astype(complex),
    )
    with pytest.raises(SolverFailure) as err:
        sd.solve_sdp(prob, max_iter=60)
    assert err.value.status == "numerical_failure"


def test_solver_accepts_redundant_consistent_rows():
    f = np.zeros((2, 2), dtype=complex)
    f[0, 0] = 1.0
    g = np.zeros((2, 2), dtype=complex)
    g[1, 1] = 1.0
    sol = sd.solve_sdp(sd.SdpProblem(
        psd_variables=(("X", 2),),
        equality_constraints=(
            (np.eye(2, dtype=complex), 1.0),
            (f, 0.3),
            (g, 0.7),
        ),
        objective=np.diag([1.0, 0.0]).astype(complex),
    ))
    assert sol.objective_value == pytest.approx(0.3, abs=1e-7)


def test_problem_rejects_non_hermitian_objective():
    bad = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    with pytest.raises(ValidationError):
        sd.SdpProblem(psd_variables=(("X", 2),),
                      equality_constraints=((np.eye(2, dtype=complex), 1.0),),
                      objective=bad)


def test_solution_certificates_respect_tolerances():
    prob = sd.SdpProblem(
        psd_variables=(("X", 3),),
        equality_constraints=((np.eye(3, dtype=complex), 1.0),),
        objective=np.diag([1.0, 2.0, -1.0]).astype(complex),
    )
    sol = sd.solve_sdp(prob, gap_tol=1e-8, feas_tol=1e-9)
    assert sol.status == "optimal"
    assert sol.duality_gap <= 1e-8
    assert sol.primal_residual <= 1e-9
    assert sol.dual_residual <= 1e-9
    x = sol.variable_values["X"]
    assert np.linalg.eigvalsh(x).min() >= -1e-9


def test_solver_random_diagonal_programs(rng):
    # diagonal SDPs reduce to LPs with known optimum: max over vertices
    for _ in range(10):
        d = int(rng.integers(2, 6))
        c = rng.standard_normal(d)
        prob = sd.SdpProblem(
            psd_variables=(("X", d),),
            equality_constraints=((np.eye(d, dtype=complex), 1.0),),
            objective=np.diag(c).astype(complex),
        )
        sol = sd.solve_sdp(prob)
        assert sol.objective_value == pytest.approx(c.max(), abs=1e-6)


def test_solver_matches_largest_eigenvalue(rng):
    # max tr(HX) over PSD unit-trace X equals the top eigenvalue of H,
    # checked against the eigensolver on random complex Hermitian objectives
    for _ in range(20):
        d = int(rng.integers(2, 7))
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = 0.5 * (g + g.conj().T)
        prob = sd.SdpProblem(
            psd_variables=(("X", d),),
            equality_constraints=((np.eye(d, dtype=complex), 1.0),),
            objective=h,
        )
        sol = sd.solve_sdp(prob)
        assert sol.objective_value == pytest.approx(
            np.linalg.eigvalsh(h).max(), abs=1e-6
        )


# ---------------------------------------------------------------------------
# Sign vectors
# ---------------------------------------------------------------------------

def test_enumerate_sign_vectors():
    assert sd.enumerate_sign_vectors(1) == [(1,)]
    assert sd.enumerate_sign_vectors(2) == [(1, 1), (1, -1)]
    assert len(sd.enumerate_sign_vectors(3)) == 4
    assert len(sd.enumerate_sign_vectors(3, full=True)) == 8
    with pytest.raises(ValidationError):
        sd.enumerate_sign_vectors(21)


# ---------------------------------------------------------------------------
# Program construction
# ---------------------------------------------------------------------------

def feasible_point(pre, populations):
    """X built from an explicit (pre-processing, input populations) pair."""
    da = len(populations)
    db = pre.dim_out
    x = np.zeros((da * db, da * db), dtype=complex)
    for i in range(da):
        for j in range(da):
            block = np.sqrt(populations[i] * populations[j]) * ch.apply(
                pre, np.outer(la.basis_ket(da, i), la.basis_ket(da, j).conj())
            )
            x[i * db:(i + 1) * db, j * db:(j + 1) * db] = block
    return x


def objective_value_at(problem, x):
    return float(np.real(np.trace(problem.objective @ x)))


def test_program_shape_qubit():
    theta = ch.random_channel(2, 2, np.random.default_rng(0))
    prob = sd.build_sign_program(theta, cfg_half(), (1, -1))
    assert prob.block_dim == 4
    assert len(sd.enumerate_sign_vectors(theta.dim_out, full=True)) == 4
    assert len(sd.enumerate_sign_vectors(theta.dim_out)) == 2


def test_program_objective_matches_game_pipeline(rng):
    # the linear objective evaluated at an explicit feasible X must equal the
    # signed population sum of the corresponding game pipeline
    for _ in range(20):
        da = int(rng.integers(2, 4))
        db = int(rng.integers(2, 4))
        nout = int(rng.integers(2, 4))
        theta = ch.random_channel(db, nout, rng)
        cfg = ms.GameConfig(float(rng.uniform(0, 1)), rng.uniform(0, 2 * np.pi, da))
        signs = tuple(rng.choice([-1, 1], size=nout))
        prob = sd.build_sign_program(theta, cfg, signs)

        pre = ch.random_di(da, db, rng)
        populations = rng.dirichlet(np.ones(da))
        x = feasible_point(pre, populations)

        amp = np.sqrt(populations)
        rho = np.outer(amp, amp).astype(complex)
        out = ch.apply(theta, ch.apply(pre, ch.apply(ms.signal_map(cfg), rho)))
        direct = float(np.real(np.sum(np.asarray(signs) * np.diagonal(out))))
        assert objective_value_at(prob, x) == pytest.approx(direct, abs=1e-10)


def test_feasible_points_satisfy_constraints(rng):
    theta = ch.random_channel(2, 2, rng)
    prob = sd.build_sign_program(theta, cfg_half(), (1, -1))
    x = feasible_point(ch.random_di(2, 2, rng), rng.dirichlet(np.ones(2)))
    for f, target in prob.equality_constraints:
        got = complex(np.sum(np.conj(f) * x))
        assert got == pytest.approx(complex(target), abs=1e-10)


def test_all_ones_program_is_pinned_to_prior(rng):
    theta = ch.random_channel(2, 2, rng)
    for lam in (0.2, 0.5, 0.8):
        cfg = ms.GameConfig(lam, np.array([2.0 * np.pi / 3.0, 0.0]))
        prob = sd.build_sign_program(theta, cfg, (1, 1))
        for _ in range(5):
            x = feasible_point(ch.random_di(2, 2, rng), rng.dirichlet(np.ones(2)))
            assert objective_value_at(prob, x) == pytest.approx(lam - (1 - lam), abs=1e-10)


def test_di_channel_programs_never_beat_prior(rng):
    cfg = ms.GameConfig(0.7, np.array([2.0 * np.pi / 3.0, 0.0]))
    theta = ch.random_di(2, 2, rng)
    for signs in sd.enumerate_sign_vectors(2, full=True):
        sol = sd.solve_sdp(sd.build_sign_program(theta, cfg, signs))
        assert sol.objective_value <= cfg.prior_gap + 1e-7


# ---------------------------------------------------------------------------
# Full evaluation
# ---------------------------------------------------------------------------

def test_hadamard_value_certified_both_sides():
    rep = sd.preprocessed_improvement(ch.hadamard(), cfg_half())
    assert rep.value == pytest.approx(SQRT3_HALF, abs=1e-4)
    assert rep.verification_residual <= 1e-6
    # the extracted pair is itself a feasible strategy, certifying from below
    achieved = ms.game_value(ch.hadamard(), rep.phi_opt, rep.rho_opt, cfg_half())
    assert achieved >= SQRT3_HALF - 1e-4
    assert rep.trace_norm <= SQRT3_HALF + 1e-6


def test_di_channels_have_zero_improvement(rng):
    for _ in range(10):
        lam = float(rng.choice([0.25, 0.5, 0.75]))
        cfg = ms.GameConfig(lam, np.array([2.0 * np.pi / 3.0, 0.0]))
        theta = ch.random_di(2, 2, rng)
        rep = sd.preprocessed_improvement(theta, cfg, extract=False)
        assert abs(rep.value) <= 1e-6


def test_auto_equals_full(rng):
    for _ in range(8):
        din = int(rng.integers(2, 4))
        dout = int(rng.integers(2, 4))
        theta = ch.random_channel(din, dout, rng)
        cfg = ms.GameConfig(float(rng.uniform(0, 1)), rng.uniform(0, 2 * np.pi, 2))
        auto = sd.preprocessed_improvement(theta, cfg, "auto", extract=False)
        full = sd.preprocessed_improvement(theta, cfg, "full", extract=False)
        assert auto.value == pytest.approx(full.value, abs=1e-8)


def test_halved_mode_is_a_lower_bound_and_can_undershoot(rng):
    # halved enumeration can miss winners whose first sign is -1
    strict = 0
    for trial in range(12):
        theta = ch.random_channel(3, 2, rng)
        cfg = ms.GameConfig(0.75, rng.uniform(0, 2 * np.pi, 2))
        full = sd.preprocessed_improvement(theta, cfg, "full", extract=False)
        halved = sd.preprocessed_improvement(theta, cfg, "halved", extract=False)
        assert halved.value <= full.value + 1e-7
        if halved.value < full.value - 1e-6:
            strict += 1
    assert strict > 0, "expected at least one strict undershoot in this ensemble"


def test_halved_matches_full_on_symmetric_qubit_case(rng):
    for _ in range(6):
        theta = ch.random_channel(2, 2, rng)
        full = sd.preprocessed_improvement(theta, cfg_half(), "full", extract=False)
        halved = sd.preprocessed_improvement(theta, cfg_half(), "halved", extract=False)
        assert halved.value == pytest.approx(full.value, abs=1e-7)


def test_auto_per_sign_values_match_full(rng):
    theta = ch.random_channel(2, 2, rng)
    cfg = ms.GameConfig(0.7, rng.uniform(0, 2 * np.pi, 2))
    auto = sd.preprocessed_improvement(theta, cfg, "auto", extract=False)
    full = sd.preprocessed_improvement(theta, cfg, "full", extract=False)
    assert auto.sign_vectors == full.sign_vectors
    for a, f in zip(auto.per_sign_values, full.per_sign_values):
        assert a == pytest.approx(f, abs=1e-7)


def test_thread_pool_is_deterministic(rng):
    theta = ch.random_channel(2, 3, rng)
    cfg = ms.GameConfig(0.5, rng.uniform(0, 2 * np.pi, 2))
    serial = sd.preprocessed_improvement(theta, cfg, extract=False, threads=1)
    pooled = sd.preprocessed_improvement(theta, cfg, extract=False, threads=4)
    assert serial.value == pooled.value
    assert serial.per_sign_values == pooled.per_sign_values


def test_prior_endpoints_have_zero_improvement(rng):
    # lam = 1: the phases are never applied; lam = 0: they always are.  Either
    # way there is nothing to distinguish and the improvement vanishes.
    theta = ch.random_channel(2, 2, rng)
    for lam in (0.0, 1.0):
        cfg = ms.GameConfig(lam, np.array([2.0 * np.pi / 3.0, 0.0]))
        rep = sd.preprocessed_improvement(theta, cfg, extract=False)
        assert rep.value == pytest.approx(0.0, abs=1e-7)
        assert rep.trace_norm == pytest.approx(1.0, abs=1e-7)


def test_halved_mode_extraction_below_half_prior(rng):
    # reflection path: the extracted pair must still achieve the value under
    # the original (lam < 1/2) configuration
    theta = ch.random_channel(2, 2, rng)
    cfg = ms.GameConfig(0.3, np.array([2.0 * np.pi / 3.0, 0.0]))
    rep = sd.preprocessed_improvement(theta, cfg, "halved")
    assert rep.verification_residual <= 1e-6
    achieved = ms.game_value(theta, rep.phi_opt, rep.rho_opt, cfg)
    assert achieved == pytest.approx(rep.trace_norm, abs=1e-6)


def test_prior_reflection_identity(rng):
    # the value is invariant under (lam, phi) -> (1 - lam, -phi)
    for _ in range(6):
        theta = ch.random_channel(2, 2, rng)
        lam = float(rng.uniform(0, 1))
        phi = rng.uniform(0, 2 * np.pi, 2)
        a = sd.preprocessed_improvement(theta, ms.GameConfig(lam, phi), extract=False)
        b = sd.preprocessed_improvement(theta, ms.GameConfig(1 - lam, -phi), extract=False)
        assert a.value == pytest.approx(b.value, abs=1e-7)


def test_rejects_non_cptp_input():
    with pytest.raises(ValidationError):
        sd.preprocessed_improvement(ch.complementary_dephasing(2), cfg_half())


def test_trace_channel_single_output(rng):
    # dim-1 output: both sign patterns are constant, nothing is solved, and
    # the (free) channel scores zero improvement with a valid extraction
    trace_channel = ch.from_kraus([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])])
    for lam in (0.3, 0.5, 0.9):
        cfg = ms.GameConfig(lam, np.array([2.0 * np.pi / 3.0, 0.0]))
        rep = sd.preprocessed_improvement(trace_channel, cfg)
        assert abs(rep.value) <= 1e-9
        assert rep.verification_residual <= 1e-8
        assert len(rep.per_sign_values) == 2
        p = ms.success_probability(rep.value, cfg)
        assert 0.5 - 1e-12 <= p <= 1.0


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def test_extraction_uniform_full_support():
    # maximally mixed X: uniform populations, pre-processing is a classical
    # contraction; the pair reproduces the prior-only value
    x = np.eye(4, dtype=complex) / 4.0
    res = sd.extract_optimal(x, (2, 2))
    assert np.allclose(res.sigma_diag, [0.5, 0.5], atol=1e-12)
    amp = np.full((2, 2), 0.5)
    assert np.allclose(res.rho_opt, amp, atol=1e-12)
    assert ch.is_detection_incoherent(res.phi_opt, 1e-9)


def test_extraction_rank_deficient_support(rng):
    # X concentrated on the first A index: the unsupported index is rerouted
    tau = la.random_density_matrix(2, rng)
    x = np.zeros((4, 4), dtype=complex)
    x[:2, :2] = tau
    res = sd.extract_optimal(x, (2, 2))
    assert np.allclose(res.sigma_diag, [1.0, 0.0], atol=1e-9)
    assert np.allclose(res.rho_opt, la.basis_proj(2, 0), atol=1e-9)
    assert res.phi_opt.dim_in == 2
    # both basis states route to the same output
    out0 = ch.apply(res.phi_opt, la.basis_proj(2, 0))
    out1 = ch.apply(res.phi_opt, la.basis_proj(2, 1))
    assert np.allclose(out0, tau, atol=1e-8)
    assert np.allclose(out1, tau, atol=1e-8)


def test_extraction_rejects_infeasible_x():
    bad = np.eye(4, dtype=complex)  # trace 4, not 1
    with pytest.raises(ValidationError):
        sd.extract_optimal(bad, (2, 2))


def test_extraction_roundtrip_random_channels(rng):
    worst = 0.0
    for _ in range(20):
        theta = ch.random_channel(2, 2, rng)
        lam = float(rng.choice([0.35, 0.5, 0.8]))
        cfg = ms.GameConfig(lam, rng.uniform(0, 2 * np.pi, 2))
        rep = sd.preprocessed_improvement(theta, cfg)
        worst = max(worst, rep.verification_residual)
        assert ch.is_detection_incoherent(rep.phi_opt, 1e-7)
    assert worst <= 1e-5


def test_verify_extraction_on_free_channel(rng):
    cfg = ms.GameConfig(0.8, np.array([2.0 * np.pi / 3.0, 0.0]))
    theta = ch.random_di(2, 2, rng)
    rep = sd.preprocessed_improvement(theta, cfg)
    res = sd.ExtractionResult(rep.sigma_diag, rep.rho_opt, rep.phi_opt)
    assert sd.verify_extraction(theta, cfg, res, rep.trace_norm) <= 1e-8


# ---------------------------------------------------------------------------
# Measure properties (moderate sample counts; acceptance runs the full sizes)
# ---------------------------------------------------------------------------

def test_monotonicity_under_free_composition(rng):
    cfg = cfg_half()
    for _ in range(10):
        theta = ch.random_channel(2, 2, rng)
        free = ch.random_di(2, 2, rng)
        base = sd.preprocessed_improvement(theta, cfg, extract=False).value
        left = sd.preprocessed_improvement(ch.compose(free, theta), cfg, extract=False).value
        right = sd.preprocessed_improvement(ch.compose(theta, free), cfg, extract=False).value
        assert left <= base + 1e-5
        assert right <= base + 1e-5


def test_tensor_constancy(rng):
    cfg = cfg_half()
    theta = ch.random_channel(2, 2, rng)
    base = sd.preprocessed_improvement(theta, cfg, extract=False).value
    widened = ch.tensor(theta, ch.identity_channel(2))
    assert sd.preprocessed_improvement(widened, cfg, extract=False).value == pytest.approx(
        base, abs=1e-4
    )


def test_auxiliary_system_invariance(rng):
    theta = ch.random_channel(2, 2, rng)
    base = sd.preprocessed_improvement(theta, cfg_half(), extract=False).value
    phi_aux = np.array([2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0, 0.0, 0.0])
    aux = sd.preprocessed_improvement(theta, ms.GameConfig(0.5, phi_aux), extract=False).value
    assert aux == pytest.approx(base, abs=1e-4)


def test_convexity(rng):
    cfg = cfg_half()
    for _ in range(5):
        th1 = ch.random_channel(2, 2, rng)
        th2 = ch.random_channel(2, 2, rng)
        m1 = sd.preprocessed_improvement(th1, cfg, extract=False).value
        m2 = sd.preprocessed_improvement(th2, cfg, extract=False).value
        for t in (0.25, 0.5, 0.75):
            mix = ch.mixture([th1, th2], [t, 1.0 - t])
            m_mix = sd.preprocessed_improvement(mix, cfg, extract=False).value
            assert m_mix <= t * m1 + (1.0 - t) * m2 + 1e-5


def test_faithfulness_dichotomy_probe():
    phi = np.array([2.0 * np.pi / 3.0, 0.0])
    weak = ch.hadamard_mixture(0.05)
    at_half = sd.preprocessed_improvement(weak, ms.GameConfig(0.5, phi), extract=False).value
    at_biased = sd.preprocessed_improvement(weak, ms.GameConfig(0.9, phi), extract=False).value
    assert at_half > 1e-6
    assert at_biased <= 1e-7
