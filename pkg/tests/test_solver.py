import json

import numpy as np
import pytest
from pydantic import ValidationError

from krl import solver
from krl.cones import ConeSpec
from krl.errors import ConfigError, NoConvergence, ResidualTooLarge, ZeroImage
from krl.instances import GridSpec, PLaplaceSpec, build_matrix_operator, build_plaplace_operator
from krl.operators import HConstant, MonotoneOperator, find_H_constant
from krl.oracles import dense_spectrum
from krl.solver import (TRACE_HEADER, ContinuationConfig, ContinuationTrace, continuation, delta_certificate,
                        eps_schedule, minimality_check, residual, simplicity_check, solve_eps, uniqueness_probe,
                        verify_branch_bounds)

ONES = np.ones(2)


def test_config_defaults():
    cfg = ContinuationConfig()
    assert (cfg.eps0, cfg.ratio, cfg.eps_min) == (0.1, 0.5, 1e-8)
    assert cfg.max_inner_iters == 10_000
    assert cfg.inner_tol == 1e-12


def test_config_rejects_bad_schedule():
    with pytest.raises(ConfigError):
        ContinuationConfig(eps0=1e-3, eps_min=1e-2)
    with pytest.raises(ValidationError):
        ContinuationConfig(ratio=1.0)


def test_eps_schedule_is_geometric_and_closed_by_eps_min():
    levels = eps_schedule(ContinuationConfig())
    assert levels[0] == 0.1
    assert levels[-1] == 1e-8
    assert all(a > b for a, b in zip(levels, levels[1:]))
    assert levels[1] == pytest.approx(0.05)
    quarter = eps_schedule(ContinuationConfig(ratio=0.25))
    assert quarter[-1] == levels[-1]
    assert len(quarter) < len(levels)


def test_solve_eps_symmetric_matrix(sym2):
    lam, x, iters = solve_eps(sym2, ONES, 0.1, np.array([1.0, 0.5]), ContinuationConfig())
    assert lam == pytest.approx(10.0 / 33.0, rel=1e-10)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-10)
    assert iters > 1


def test_solve_eps_identity(identity2):
    lam, x, _ = solve_eps(identity2, ONES, 0.5, np.array([1.0, 0.5]), ContinuationConfig())
    assert lam == pytest.approx(2.0 / 3.0, rel=1e-10)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-10)


def test_solve_eps_zero_image():
    T = MonotoneOperator(lambda x: np.zeros(2), 2, ConeSpec.orthant(2), "zero")
    with pytest.raises(ZeroImage):
        solve_eps(T, ONES, 0.1, ONES, ContinuationConfig())


def test_solve_eps_reports_last_iterate_on_failure(sym2):
    cfg = ContinuationConfig(max_inner_iters=2)
    with pytest.raises(NoConvergence) as info:
        solve_eps(sym2, ONES, 0.1, np.array([1.0, 0.0]), cfg)
    assert info.value.iterate.shape == (2,)
    assert info.value.residual > cfg.inner_tol
    assert info.value.exit_code == 3


def test_continuation_symmetric_matrix(sym2, tight):
    pair, trace = continuation(sym2, ONES, tight)
    assert pair.lambda0 == pytest.approx(1.0 / 3.0, rel=1e-10)
    np.testing.assert_allclose(pair.x, [1.0, 1.0], atol=1e-10)
    assert pair.residual <= 1e-6
    assert pair.in_cone
    assert np.max(np.abs(pair.x)) == pytest.approx(1.0, abs=1e-12)
    assert len(trace) == len(eps_schedule(tight))


def test_continuation_identity(identity2):
    pair, _ = continuation(identity2, ONES)
    assert pair.lambda0 == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(pair.x, [1.0, 1.0], atol=1e-6)


def test_trace_records(sym2):
    cfg = ContinuationConfig()
    _, trace = continuation(sym2, ONES, cfg)
    eps = [r.eps for r in trace]
    assert all(a > b for a, b in zip(eps, eps[1:]))
    assert all(r.residual <= cfg.inner_tol for r in trace)
    lines = trace.to_csv().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER) == "eps,lambda,iters,residual,step_delta"
    assert len(lines) == len(trace) + 1


def test_continuation_is_reproducible(sym2):
    cfg = ContinuationConfig(seed=3)
    a, _ = continuation(sym2, ONES, cfg)
    b, _ = continuation(sym2, ONES, cfg)
    assert a.lambda0 == b.lambda0
    np.testing.assert_array_equal(a.x, b.x)


def test_scaling_invariance(positive_matrix, tight):
    T = build_matrix_operator(positive_matrix(5))
    pair, _ = continuation(T, np.ones(5), tight)
    scaled, _ = continuation(T.scaled(4.0), np.ones(5), tight)
    assert scaled.lambda0 == pytest.approx(pair.lambda0 / 4.0, rel=1e-9)
    np.testing.assert_allclose(scaled.x, pair.x, atol=1e-9)


def test_schedule_ratio_does_not_change_the_limit(positive_matrix):
    T = build_matrix_operator(positive_matrix(6))
    half, _ = continuation(T, np.ones(6), ContinuationConfig(eps_min=1e-12, ratio=0.5))
    quarter, _ = continuation(T, np.ones(6), ContinuationConfig(eps_min=1e-12, ratio=0.25))
    assert quarter.lambda0 == pytest.approx(half.lambda0, rel=1e-8)


def test_residual_too_large_carries_pair_and_trace(sym2):
    cfg = ContinuationConfig(acceptance_residual=1e-30)
    with pytest.raises(ResidualTooLarge) as info:
        continuation(sym2, ONES, cfg)
    assert info.value.pair.lambda0 == pytest.approx(1.0 / 3.0, rel=1e-6)
    assert len(info.value.trace) == len(eps_schedule(cfg))


def test_no_convergence_carries_partial_trace(sym2):
    with pytest.raises(NoConvergence) as info:
        continuation(sym2, ONES, ContinuationConfig(max_inner_iters=1))
    assert isinstance(info.value.trace, ContinuationTrace)


def test_residual_examples(sym2):
    assert residual(sym2, 1.0 / 3.0, [1.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
    assert residual(sym2, 1.0, [1.0, 0.0]) == pytest.approx(1.0)


def test_eigenpair_json(sym2, tight):
    pair, _ = continuation(sym2, ONES, tight)
    data = json.loads(pair.to_json())
    assert {"lambda0", "residual", "norm", "x"} <= set(data)
    assert data["norm"] == "sup"
    assert len(data["x"]) == 2


def test_branch_bounds_on_matrix_trace(sym2):
    H = find_H_constant(sym2, ONES)
    assert H.M == pytest.approx(1.0 / 3.0)
    _, trace = continuation(sym2, ONES)
    assert trace.records[0].lam == pytest.approx(10.0 / 33.0, rel=1e-10)
    report = verify_branch_bounds(sym2, ONES, H, trace)
    assert report.passed
    assert report.details["depth"] == 8


def test_branch_bounds_flag_a_too_small_M(sym2):
    _, trace = continuation(sym2, ONES)
    report = verify_branch_bounds(sym2, ONES, HConstant(M=0.1, u=ONES), trace)
    assert not report.passed
    assert report.witness["check"] == "lambda_le_M" or report.witness["check"].startswith("iterate_")


def test_branch_bounds_on_plaplace_trace(small_grid):
    T = build_plaplace_operator(PLaplaceSpec(p=3.0, grid=small_grid))
    u = T.default_u()
    _, trace = continuation(T, u)
    assert verify_branch_bounds(T, u, find_H_constant(T, u), trace).passed


def test_uniqueness_positive_matrix(sym2, tight):
    report = uniqueness_probe(sym2, tight, k=20)
    assert report.passed
    assert report.details["max_pairwise_distance"] < 1e-8
    assert report.details["excluded_runs"] == 0


def test_uniqueness_flags_identity(identity2):
    report = uniqueness_probe(identity2, k=20)
    assert not report.passed
    assert report.details["precondition_strong_positivity"] is False
    assert report.details["max_pairwise_distance"] > 1e-3


def test_uniqueness_excludes_failed_runs(sym2, tight, monkeypatch):
    real = solver.continuation
    calls = []

    def flaky(T, u=None, cfg=None, start=None):
        calls.append(start)
        if len(calls) == 1:
            raise NoConvergence("stalled", residual=0.5, level=3)
        return real(T, u, cfg, start=start)

    monkeypatch.setattr(solver, "continuation", flaky)
    report = uniqueness_probe(sym2, tight, k=5)
    assert len(calls) == 5
    assert report.details["excluded_runs"] == 1
    assert report.passed


@pytest.mark.slow
def test_uniqueness_plaplace():
    T = build_plaplace_operator(PLaplaceSpec(p=1.5, grid=GridSpec(n=49)))
    report = uniqueness_probe(T, k=20)
    assert report.details["max_pairwise_distance"] < 1e-5
    assert report.details["lambda_spread"] < 1e-6


def test_delta_certificate_for_parallel_vectors():
    K = ConeSpec.orthant(2, 0.0)
    d, gap = delta_certificate(K, np.array([1.0, 1.0]), np.array([0.5, 0.5]))
    assert d == pytest.approx(2.0)
    assert gap == pytest.approx(0.0, abs=1e-12)


def test_minimality_examples(sym2, tight):
    pair, _ = continuation(sym2, ONES, tight)
    report = minimality_check(sym2, pair.lambda0, pair.x)
    assert report.passed
    assert report.details["spectral_radius"] == pytest.approx(3.0)
    assert report.details["delta_relations"] is True
    swap = build_matrix_operator([[0.0, 1.0], [1.0, 0.0]])
    assert minimality_check(swap, 1.0).passed


def test_minimality_rejects_wrong_eigenvalue(sym2):
    assert not minimality_check(sym2, 1.0).passed


def test_minimality_needs_matrix(plaplace3):
    with pytest.raises(ConfigError):
        minimality_check(plaplace3, 1.0)


def test_simplicity(sym2, identity2):
    assert simplicity_check(sym2, 1.0 / 3.0).passed
    report = simplicity_check(identity2, 1.0)
    assert not report.passed
    assert report.details["eigenspace_dimension"] == 2


def test_linear_specialization(positive_matrix, tight):
    for i in range(50):
        n = 2 + i % 7
        A = positive_matrix(n)
        T = build_matrix_operator(A)
        pair, _ = continuation(T, np.ones(n), tight)
        spectrum = dense_spectrum(A)
        assert pair.lambda0 * spectrum.radius == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(pair.x, spectrum.perron_vector, atol=1e-6)
        assert minimality_check(T, pair.lambda0).passed
        assert simplicity_check(T, pair.lambda0).passed
