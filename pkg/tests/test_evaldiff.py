import numpy as np
import pytest

from pathtrack.evaldiff import (Evaluator, OldBaselineEvaluator, eval_monomial_with_partials, eval_old_baseline,
                                suffix_prefix_products)
from pathtrack.polysys import (CONSTANT, ExponentVector, SupportedSystem, SystemSpec, generate_system,
                               jacobian_reference, monomial_reference, newton_homotopy, random_point)
from pathtrack.scalar import PrecisionLevel

from conftest import quadratic_homotopy


class CountingMul:
    def __init__(self):
        self.count = 0

    def __call__(self, a, b):
        self.count += 1
        return a * b


def ev(*pairs):
    return ExponentVector(tuple(pairs))


class TestSuffixPrefixProducts:
    @pytest.mark.parametrize("v,expected", [
        ([5], [1]),
        ([2, 3, 5], [15, 10, 6]),
        ([2, 3, 5, 7], [105, 70, 42, 30]),
    ])
    def test_examples(self, v, expected):
        assert suffix_prefix_products(v) == expected

    @pytest.mark.parametrize("k", range(1, 12))
    def test_multiplication_count(self, k):
        mul = CountingMul()
        v = list(range(2, 2 + k))
        out = suffix_prefix_products(v, mul)
        assert mul.count == max(0, 3 * k - 6)
        full = int(np.prod(v))
        assert out == [full // x for x in v]


class TestMonomial:
    def test_examples(self, precision):
        val, parts, (om, _) = eval_monomial_with_partials([2, 3, 5], ev((0, 1), (1, 1), (2, 1)), precision, True)
        assert precision.to_complex(np.asarray(val)) == 30
        assert np.array_equal(precision.to_complex(parts), [15, 10, 6]) and om == 3
        val, parts = eval_monomial_with_partials([2, 3], ev((0, 2), (1, 3)), precision)
        assert precision.to_complex(np.asarray(val)) == 108
        assert np.array_equal(precision.to_complex(parts), [54, 36])

    def test_constant(self, precision):
        val, parts = eval_monomial_with_partials([2.0], CONSTANT, precision)
        assert precision.to_complex(np.asarray(val)) == 1 and len(parts) == 0

    def test_counts(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            k = int(rng.integers(1, 9))
            a = rng.integers(1, 6, k)
            e = ExponentVector(tuple(zip(range(k), a.tolist())))
            _, _, (om, total) = eval_monomial_with_partials(rng.random(k) + 0j, e, return_counts=True)
            assert om == max(0, 3 * k - 6)
            assert total <= int(np.sum(a - 1)) - 1 + max(0, 3 * k - 6) + k + 1

    def test_zero_coordinates(self):
        val, parts = eval_monomial_with_partials([0.0, 3.0, 5.0], ev((0, 1), (1, 1), (2, 1)))
        assert val == 0 and np.array_equal(parts, [15, 0, 0])
        val, parts = eval_monomial_with_partials([0.0, 3.0], ev((0, 2), (1, 1)))
        assert val == 0 and np.array_equal(parts, [0, 0])

    def test_against_brute_force(self, precision):
        rng = np.random.default_rng(9)
        for _ in range(300):
            k = int(rng.integers(0, 7))
            e = ExponentVector(tuple(zip(sorted(rng.choice(8, k, replace=False).tolist()),
                                         rng.integers(1, 6, k).tolist())))
            x = rng.uniform(0.5, 1.5, 8) * np.exp(2j * np.pi * rng.random(8))
            val, parts = eval_monomial_with_partials(x, e, precision)
            ref = monomial_reference(x, e)
            assert abs(complex(precision.to_complex(np.asarray(val))) - ref) <= 1e-13 * abs(ref)
            for m, (v, a) in enumerate(e.entries):
                dense = e.dense(8)
                dense[v] -= 1
                r = monomial_reference(x, ExponentVector.from_dense(dense))
                assert abs(precision.to_complex(parts)[m] - r) <= 1e-13 * abs(r)


class TestStages:
    def test_single_monomial(self):
        f = SupportedSystem(1, [ev((0, 2))], [[1]])
        h = newton_homotopy(f, [1.0])
        y = Evaluator(h).evaluate([3.0], 1.0)
        assert y.residual[0] == 9 and y.jacobian[0, 0] == 6

    def test_newton_homotopy_points(self, precision):
        h = quadratic_homotopy(precision)
        y = Evaluator(h).evaluate([1.0], 0.0)
        assert np.array_equal(precision.to_complex(y.residual), [0]) and precision.to_complex(y.jacobian)[0, 0] == 2
        y = Evaluator(h).evaluate([1.1], 0.0)
        assert abs(precision.to_complex(y.residual)[0] - 0.21) < 1e-15

    def test_stride_partition(self):
        f = generate_system(SystemSpec(3, 5, 3, seed=1))
        ev_ = Evaluator(newton_homotopy(f, random_point(3, 2)))
        z = random_point(3, 5)
        ev_.monomial_stage(0, 2, z)
        assert np.all(ev_.vval[[1, 3, 5]] == 0) and np.all(ev_.vval[[0, 2, 4]] != 0)
        ev_.monomial_stage(1, 2, z)
        assert np.all(ev_.vval != 0)
        assert ev_.monomial_evaluations == ev_.homotopy.m

    @pytest.mark.parametrize("precision", list(PrecisionLevel), ids=lambda p: p.value)
    def test_worker_invariance(self, precision):
        f = generate_system(SystemSpec(8, 20, 6, seed=3))
        h = newton_homotopy(f, random_point(8, 4), precision)
        z = precision.to_field(random_point(8, 5))
        t = precision.kernel_real(0.3)
        ref = Evaluator(h)
        ref.monomial_stage(0, 1, z)
        ref.coefficient_stage(0, 1, t)
        for p in (2, 4, 8):
            e = Evaluator(h)
            for w in reversed(range(p)):
                e.monomial_stage(w, p, z)
            for w in range(p):
                e.coefficient_stage(w, p, t)
            assert e.vval.tobytes() == ref.vval.tobytes() and e.vpart.tobytes() == ref.vpart.tobytes()
            assert e.ab.tobytes() == ref.ab.tobytes() and e.res.tobytes() == ref.res.tobytes()

    def test_one_evaluation_per_monomial(self):
        f = generate_system(SystemSpec(10, 15, 5, seed=7))
        e = Evaluator(newton_homotopy(f, random_point(10, 1)))
        e.evaluate(random_point(10, 2), 0.5)
        assert e.monomial_evaluations == 16


class TestJacobian:
    def test_matches_references(self):
        rng = np.random.default_rng(1)
        for seed in range(5):
            f = generate_system(SystemSpec(6, 12, 5, seed=seed))
            z = random_point(6, seed + 10)
            y = Evaluator(newton_homotopy(f, random_point(6, seed), PrecisionLevel.D)).evaluate(z, 1.0)
            jr = np.array(jacobian_reference(f, list(z)))
            assert np.allclose(y.jacobian, jr, rtol=0, atol=1e-13 * np.abs(jr).max())

    def test_central_differences(self):
        f = generate_system(SystemSpec(5, 10, 4, seed=3))
        h = newton_homotopy(f, random_point(5, 1))
        ev_ = Evaluator(h)
        z, t, step = random_point(5, 2), 0.4, 1e-6
        J = ev_.evaluate(z, t).jacobian
        for v in range(5):
            d = np.zeros(5, complex)
            d[v] = step
            fd = (ev_.evaluate(z + d, t).residual - ev_.evaluate(z - d, t).residual) / (2 * step)
            assert np.linalg.norm(fd - J[:, v]) <= 1e-5 * max(1.0, np.linalg.norm(J[:, v]))

    @pytest.mark.parametrize("precision,tol", [(PrecisionLevel.D, 1e-12), (PrecisionLevel.DD, 1e-26)],
                             ids=["d", "dd"])
    def test_old_baseline_agrees(self, precision, tol):
        for seed in range(3):
            f = generate_system(SystemSpec(10, 10, 6, seed=seed))
            h = newton_homotopy(f, random_point(10, seed + 1), precision)
            z = random_point(10, seed + 2)
            new = Evaluator(h).evaluate(z, 0.37)
            old = eval_old_baseline(h, z, 0.37)
            for a, b in ((new.residual, old.residual), (new.jacobian, old.jacobian)):
                a, b = precision.to_scalars(a).ravel(), precision.to_scalars(b).ravel()
                scale = max(float(abs(x)) for x in b)
                assert max(float(abs(x - y)) for x, y in zip(a, b)) <= tol * scale

    def test_old_baseline_layout(self):
        h = quadratic_homotopy()
        old = OldBaselineEvaluator(h)
        assert old.coef.shape == (1, 4)
        y = old.evaluate([1.1], 0.0)
        assert abs(y.residual[0] - 0.21) < 1e-15 and abs(y.jacobian[0, 0] - 2.2) < 1e-15
