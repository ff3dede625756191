import numpy as np
import pytest

from pathtrack.linsolve import LinearSolver, SingularMatrixError, back_substitute, ge_partial_pivot, solve
from pathtrack.scalar import PrecisionLevel
from pathtrack.team import WorkerTeam


def random_system(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    return A, b


def augmented(A, b, precision):
    ab = precision.zeros((A.shape[0], A.shape[0] + 1))
    ab[:, :-1] = precision.to_field(A)
    ab[:, -1] = precision.to_field(b)
    return ab


class TestExamples:
    def test_two_by_two(self, precision):
        A = np.array([[2, 1], [1, 3]], complex)
        x = precision.to_complex(solve(A, [3, 5], precision))
        assert np.allclose(x, [0.8, 1.4], atol=1e-15)

    def test_pivoting_swaps(self, precision):
        A = np.array([[1e-20, 1], [1, 1]], complex)
        x = precision.to_complex(solve(A, [1, 2], precision))
        assert np.allclose(x, [1, 1], atol=1e-15)
        trace = []
        _, perm = ge_partial_pivot(augmented(A, np.array([1, 2]), precision), precision, trace=trace)
        assert trace[0][:2] == (0, 1) and list(perm) == [1, 0]

    def test_identity(self, precision):
        x = solve(np.eye(5), np.ones(5), precision)
        assert np.array_equal(precision.to_complex(x), np.ones(5))

    def test_one_by_one_and_n_below_p(self, precision):
        assert precision.to_complex(solve([[4j]], [2], precision, p=8))[0] == -0.5j
        A, b = random_system(3, 1)
        assert np.array_equal(solve(A, b, precision, p=8), solve(A, b, precision, p=1))

    def test_singular(self, precision):
        A = np.array([[1, 2], [2, 4]], complex)
        for p in (1, 2):
            with pytest.raises(SingularMatrixError):
                solve(A, [1, 1], precision, p=p)
        with pytest.raises(SingularMatrixError):
            solve(np.zeros((3, 3)), np.ones(3), precision)

    def test_validation(self):
        with pytest.raises(ValueError):
            solve(np.eye(2), np.ones(3))
        with pytest.raises(ValueError):
            LinearSolver(PrecisionLevel.D, 0)


class TestProperties:
    def test_multiply_back(self):
        for seed in range(20):
            A, b = random_system(12, seed)
            x = solve(A, b)
            kappa = np.linalg.cond(A, np.inf).real
            assert np.abs(A @ x - b).max() <= 12 * kappa * 2.0**-52 * np.abs(b).max()

    def test_multiply_back_double_double(self):
        import mpmath
        mpmath.mp.prec = 250
        P = PrecisionLevel.DD
        A, b = random_system(6, 3)
        x = P.to_scalars(solve(A, b, P))
        xs = [mpmath.mpc(mpmath.mpf(v.re.hi) + v.re.lo, mpmath.mpf(v.im.hi) + v.im.lo) for v in x]
        bound = mpmath.mpf(1e-28) * float(np.linalg.cond(A, np.inf).real)
        for i in range(6):
            s = mpmath.fsum(mpmath.mpc(A[i, j]) * xs[j] for j in range(6))
            assert abs(s - mpmath.mpc(b[i])) < bound

    def test_pivot_maximality(self, precision):
        for seed in range(10):
            A, b = random_system(9, seed)
            trace = []
            ge_partial_pivot(augmented(A, b, precision), precision, p=3, trace=trace)
            assert len(trace) == 8
            for c, r, moduli in trace:
                assert moduli[r - c] == max(moduli)

    @pytest.mark.parametrize("n", [1, 5, 8, 13])
    def test_worker_count_invariance(self, precision, n):
        A, b = random_system(n, n)
        ab = augmented(A, b, precision)
        ref_ab, ref_perm = ge_partial_pivot(ab, precision, p=1)
        ref_x = back_substitute(ref_ab, precision, p=1)
        for p in (2, 4, 8):
            red, perm = ge_partial_pivot(ab, precision, p=p)
            assert red.tobytes() == ref_ab.tobytes() and np.array_equal(perm, ref_perm)
            assert back_substitute(red, precision, p=p).tobytes() == ref_x.tobytes()

    def test_traced_path_matches_fused(self, precision):
        A, b = random_system(7, 4)
        ab = augmented(A, b, precision)
        fused, _ = ge_partial_pivot(ab, precision)
        traced, _ = ge_partial_pivot(ab, precision, trace=[])
        assert fused.tobytes() == traced.tobytes()

    def test_solver_reuse_in_team(self):
        P = PrecisionLevel.D
        solver = LinearSolver(P, 4)
        with WorkerTeam(2) as team:
            for seed in range(5):
                A, b = random_system(4, seed)
                ab = augmented(A, b, P)
                assert team.run(lambda wid: solver.reduce(ab, wid, team))
                team.run(lambda wid: solver.back_substitute(ab, wid, team))
                assert np.allclose(A @ solver.x, b)
        assert solver.reductions == 5 and solver.back_substitutions == 5
