from fractions import Fraction

import numpy as np
import pytest

from pathtrack.corrector import NewtonConfig, NewtonCorrector, newton_correct, residual_norm
from pathtrack.polysys import CONSTANT, ExponentVector, SupportedSystem, newton_homotopy
from pathtrack.scalar import PrecisionLevel
from pathtrack.team import WorkerTeam

from conftest import trackable_homotopy


def square_minus_four(precision=PrecisionLevel.D):
    """h = x**2 - 4 for every t (start point is the root 2)."""
    f = SupportedSystem(1, [ExponentVector(((0, 2),)), CONSTANT], [[1, -4]])
    return newton_homotopy(f, [2.0], precision)


def exact_newton(z, steps):
    z = Fraction(z)
    out = [abs(z * z - 4)]
    for _ in range(steps):
        z -= (z * z - 4) / (2 * z)
        out.append(abs(z * z - 4))
    return out


class TestConfig:
    def test_defaults(self):
        assert NewtonConfig.default(PrecisionLevel.D) == NewtonConfig(1e-8, 4)
        assert NewtonConfig.default(PrecisionLevel.DD).eps == 1e-24

    @pytest.mark.parametrize("kw", [dict(eps=0), dict(eps=-1), dict(eps=1, max_it=0), dict(eps=1, max_it=1.5)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            NewtonConfig(**kw)


class TestResidualNorm:
    def test_examples(self, precision):
        assert float(residual_norm(np.zeros(3, complex), precision)) == 0
        assert float(residual_norm(np.array([3 + 4j, 1]), precision)) == 5
        assert np.isnan(float(residual_norm(np.array([1, np.inf]), precision)))


class TestNewton:
    def test_hand_iteration(self):
        out = newton_correct(square_minus_four(), [3.0], 0.7, NewtonConfig(1e-30, 1))
        assert abs(out.z[0] - 13 / 6) < 1e-15 and out.iterations == 1 and not out.success
        out = newton_correct(square_minus_four(), [3.0], 0.7, NewtonConfig(1e-30, 4))
        ref = exact_newton(3, 4)
        assert len(out.residuals) == 5 and out.failure == "max-it"
        for got, want in zip(out.residuals, ref):
            assert abs(got - want) <= 1e-5 * want
        out = newton_correct(square_minus_four(), [3.0], 0.7, NewtonConfig(1e-12, 5))
        assert out.success and out.residual < 1e-12 and out.iterations == 5

    def test_already_converged(self, precision):
        z = precision.to_field(np.array([2.0]))
        out = newton_correct(square_minus_four(precision), z, 0.2)
        assert out.success and out.iterations == 0 and out.z.tobytes() == z.tobytes()

    def test_singular_jacobian(self):
        out = newton_correct(square_minus_four(), [0.0], 0.5)
        assert not out.success and out.failure == "singular" and out.iterations == 0

    def test_nonfinite_iterate(self):
        out = newton_correct(square_minus_four(), [1e300], 0.5)
        assert not out.success and out.failure == "nonfinite"

    def test_double_double_reaches_tolerance(self):
        out = newton_correct(square_minus_four(PrecisionLevel.DD), [3.0], 0.5, NewtonConfig(1e-28, 8))
        assert out.success and float(out.residual) < 1e-28

    def test_instrumented_counts(self):
        h = trackable_homotopy(6, 2)
        corr = NewtonCorrector(h)
        out = corr.correct(h.z0, 0.01, NewtonConfig(1e-30, 3))
        assert out.iterations == 3
        assert corr.evaluator.monomial_evaluations == h.m * 4   # one per iteration plus the final check
        assert corr.solver.reductions == 3 and corr.solver.back_substitutions == 3

    def test_worker_count_invariance(self, precision):
        h = trackable_homotopy(9, 2, precision)
        ref = None
        for p in (1, 2, 4, 8):
            with WorkerTeam(p) as team:
                corr = NewtonCorrector(h, team)
                outs = [corr.correct(h.z0, t, NewtonConfig.default(precision, max_it=6)) for t in (0.001, 0.002)]
            key = [(o.z.tobytes(), o.iterations, o.success, repr(o.residuals)) for o in outs]
            ref = ref or key
            assert key == ref
        assert ref[0][2]

    def test_stage_times_recorded(self):
        h = trackable_homotopy(6, 1)
        corr = NewtonCorrector(h)
        corr.correct(h.z0, 0.001)
        assert set(corr.stage_times) >= {"evaluate", "eliminate", "backsub"}
