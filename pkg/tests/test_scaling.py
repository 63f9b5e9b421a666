import math

import numpy as np
import pytest

from src.augment.rng import RngStream
from src.calibration.scaling import (
    FitConfig,
    LogitMatrix,
    Temperature,
    fit_temperature,
    nll,
    scale_probabilities,
    softmax_with_temperature,
)
from src.calibration.search import golden_section, grid_bracket
from src.errors import InvalidInputError


def _calibrated_logits(n: int, k: int = 4, seed: int = 0, alpha: float = 0.3) -> LogitMatrix:
    """Log true class probabilities with labels drawn from them (T* = 1)."""
    rng = RngStream(seed, "dirichlet").generator
    probs = rng.dirichlet([alpha] * k, size=n)
    probs = np.maximum(probs, 1e-12)
    probs /= probs.sum(axis=1, keepdims=True)
    labels = np.array([rng.choice(k, p=row) for row in probs])
    return LogitMatrix.build(np.log(probs), labels)


class TestSoftmax:
    def test_closed_forms(self):
        e2 = math.exp(2)
        assert softmax_with_temperature([2, 0], 1.0) == pytest.approx([e2 / (e2 + 1), 1 / (e2 + 1)])
        assert softmax_with_temperature([2, 0], 2.0) == pytest.approx([0.7311, 0.2689], abs=1e-4)

    def test_shift_invariant_rows_sum_to_one(self):
        rng = RngStream(7, "shift").generator
        for _ in range(50):
            z = rng.normal(0, 5, size=6)
            t = float(rng.uniform(0.2, 10.0))
            p = softmax_with_temperature(z, t)
            assert abs(math.fsum(p) - 1.0) <= 1e-12
            for c in (-300.0, 7.5, 1000.0):
                assert np.max(np.abs(softmax_with_temperature(z + c, t) - p)) <= 1e-12

    def test_matrix_rows_sum_to_one(self):
        rng = RngStream(8, "rows").generator
        m = LogitMatrix.build(rng.normal(0, 8, size=(100, 5)), rng.integers(0, 5, size=100))
        for t in (0.1, 1.0, 30.0):
            sums = scale_probabilities(m, t).probabilities.sum(axis=1)
            assert np.max(np.abs(sums - 1.0)) <= 1e-12

    def test_softening_limit(self):
        p = softmax_with_temperature([3.0, -1.0, 0.5], 1e6)
        assert np.all(np.abs(p - 1 / 3) < 1e-5)

    def test_rejects_bad_temperature(self):
        for t in (0.0, -1.0, float("inf"), float("nan")):
            with pytest.raises(InvalidInputError):
                softmax_with_temperature([1.0, 0.0], t)
        with pytest.raises(InvalidInputError):
            Temperature(0.0)

    def test_rejects_non_finite_logits(self):
        with pytest.raises(InvalidInputError):
            softmax_with_temperature([float("nan"), 0.0], 1.0)


class TestScaleProbabilities:
    def test_rows_match_oracle_and_argmax_is_kept(self):
        rng = RngStream(2, "scale").generator
        m = LogitMatrix.build(rng.normal(0, 3, size=(20, 4)), rng.integers(0, 4, size=20))
        base = scale_probabilities(m, 1.0)
        for t in (0.3, 2.0, 50.0):
            preds = scale_probabilities(m, t)
            assert np.array_equal(preds.predictions, base.predictions)
            for row, z in zip(preds.probabilities, m.logits):
                e = np.exp((z - z.max()) / t)
                assert row == pytest.approx(e / e.sum(), abs=1e-12)

    def test_identity_temperature(self):
        z = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 4.0]])
        preds = scale_probabilities(LogitMatrix.build(z, [0, 2]), Temperature(1.0))
        for i in range(2):
            assert preds.probabilities[i] == pytest.approx(softmax_with_temperature(z[i], 1.0))


class TestNll:
    def test_uniform_logits(self):
        for t in (0.5, 1.0, 7.0):
            assert nll(LogitMatrix.build([[0.0, 0.0]], [1]), t) == pytest.approx(math.log(2))

    def test_closed_form(self):
        assert nll(LogitMatrix.build([[1.0, 0.0]], [0]), 1.0) == pytest.approx(
            math.log(1 + math.exp(-1)), abs=1e-12
        )

    def test_softening_limit(self):
        m = _calibrated_logits(50, k=5)
        assert nll(m, 1e7) == pytest.approx(math.log(5), abs=1e-5)


class TestFitTemperature:
    @pytest.mark.parametrize("c", [0.5, 2.0, 3.0, 5.0])
    def test_recovers_scale(self, c, grid_temperature):
        m = _calibrated_logits(2000, seed=11).scaled(c)
        t = fit_temperature(m).value
        best, step = grid_temperature(m, center=c)
        assert abs(math.log(t) - math.log(best)) <= step
        assert nll(m, t) <= nll(m, best) + 1e-6
        # sampling error of the MLE at n=2000 reaches a few percent
        assert t == pytest.approx(c, rel=0.15)

    def test_scale_equivariance(self):
        m = _calibrated_logits(2000, seed=12)
        base = fit_temperature(m).value
        for c in (0.5, 2.0, 3.0, 5.0):
            assert fit_temperature(m.scaled(c)).value == pytest.approx(c * base, rel=1e-3)

    def test_refit_after_division_is_identity(self):
        m = _calibrated_logits(2000, seed=13).scaled(2.5)
        t = fit_temperature(m)
        again = fit_temperature(m.scaled(1 / t.value))
        assert again.value == pytest.approx(1.0, rel=1e-3)

    def test_beats_dense_grid(self):
        m = _calibrated_logits(1000, seed=14).scaled(3.0)
        t = fit_temperature(m)
        grid = np.exp(np.linspace(math.log(0.05), math.log(20.0), 1000))
        assert t.nll_at_fit <= min(nll(m, g) for g in grid) + 1e-9
        assert t.nll_at_fit <= nll(m, 1.0)

    def test_deterministic(self):
        m = _calibrated_logits(500, seed=15).scaled(2.0)
        assert fit_temperature(m) == fit_temperature(m)

    def test_empty_holdout(self):
        with pytest.raises(InvalidInputError):
            fit_temperature(LogitMatrix.build(np.zeros((0, 3)), np.zeros(0)))

    def test_invalid_bounds(self):
        with pytest.raises(InvalidInputError):
            FitConfig(log_t_lower=1.0, log_t_upper=0.0)


class TestSearch:
    def test_golden_section_quadratic(self):
        x, fx, iterations = golden_section(lambda v: (v - 1.3) ** 2, -2.0, 4.0, tol=1e-9)
        assert x == pytest.approx(1.3, abs=1e-8)
        assert fx == pytest.approx(0.0, abs=1e-15)
        assert 0 < iterations <= 200

    def test_grid_bracket_contains_minimum(self):
        lo, hi, best_x, best_f = grid_bracket(lambda v: abs(v - 0.77), 0.0, 3.0, 16)
        assert lo <= 0.77 <= hi
        assert best_f == pytest.approx(abs(best_x - 0.77))


class TestLogitMatrix:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            LogitMatrix.build([[0.0, float("inf")]], [0])
        with pytest.raises(InvalidInputError):
            LogitMatrix.build([[0.0, 1.0]], [2])
        with pytest.raises(InvalidInputError):
            LogitMatrix.build([[0.0, 1.0], [1.0, 0.0]], [0])

    def test_concat_and_take(self):
        a = LogitMatrix.build([[1.0, 0.0]], [0], ["a"])
        b = LogitMatrix.build([[0.0, 1.0], [2.0, 2.0]], [1, 0], ["b", "c"])
        both = LogitMatrix.concat([a, b])
        assert both.sample_ids == ["a", "b", "c"]
        assert both.take([2, 0]).sample_ids == ["c", "a"]
