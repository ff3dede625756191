import numpy as np
import pytest

from pathtrack.corrector import NewtonConfig, newton_correct
from pathtrack.scalar import PrecisionLevel
from pathtrack.team import WorkerTeam
from pathtrack.tracker import PathTracker, TrackerConfig, step_size_control, track_path

from conftest import quadratic_homotopy, trackable_homotopy


class TestConfig:
    def test_defaults(self):
        cfg = TrackerConfig()
        assert (cfg.initial_step, cfg.min_step, cfg.max_step) == (0.01, 1e-6, 0.1)
        assert (cfg.contraction, cfg.expansion, cfg.max_corrections) == (0.5, 2.0, 200_000)
        assert cfg.newton == NewtonConfig(1e-8, 4)
        dd = TrackerConfig(precision=PrecisionLevel.DD)
        assert dd.min_step == 1e-8 and dd.newton.eps == 1e-24

    @pytest.mark.parametrize("kw", [
        dict(initial_step=0.2), dict(max_step=1.5), dict(min_step=0.5), dict(contraction=1.0),
        dict(expansion=1.0), dict(predictor="euler"), dict(workers=0), dict(max_corrections=-1),
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            TrackerConfig(**kw)

    def test_precision_mismatch(self):
        with pytest.raises(ValueError):
            PathTracker(quadratic_homotopy(PrecisionLevel.DD), TrackerConfig())


class TestStepControl:
    def test_examples(self):
        cfg = TrackerConfig()
        assert step_size_control(0.01, False, cfg) == 0.005
        assert step_size_control(0.1, True, cfg) == 0.1
        assert step_size_control(0.01, True, cfg) == 0.02

    def test_repeated_failures_stop_below_minimum(self):
        cfg = TrackerConfig(newton=NewtonConfig(1e-300, 1))
        r = track_path(quadratic_homotopy(), cfg)
        steps = [s for s, ok in r.stats.attempts]
        assert r.fail and r.reason == "step size below minimum"
        assert len(steps) == 14 and not any(ok for _, ok in r.stats.attempts)
        assert steps[-1] * cfg.contraction == 0.01 * 2.0**-14
        assert abs(0.01 * 2.0**-14 - 6.1035e-07) < 1e-11

    def test_initial_step_below_minimum(self):
        cfg = TrackerConfig(initial_step=1e-7, min_step=1e-6, max_step=0.1)
        r = track_path(quadratic_homotopy(), cfg)
        assert r.fail and r.stats.total_corrections == 0 and float(r.reached_t) == 0


class TestAnalyticPath:
    def test_binary64(self):
        r = track_path(quadratic_homotopy())
        assert not r.fail and abs(r.endpoint[0] - 2) <= 1e-10
        assert r.reached_t == 1.0 and r.residual < 1e-8

    def test_double_double(self):
        P = PrecisionLevel.DD
        r = track_path(quadratic_homotopy(P), TrackerConfig(precision=P))
        z = P.to_scalars(r.z)[0]
        assert not r.fail and abs(float((z.re - 2).hi)) <= 1e-24 and z.im.hi == 0

    def test_secant_also_arrives(self):
        r = track_path(quadratic_homotopy(), TrackerConfig(predictor="secant"))
        assert not r.fail and abs(r.endpoint[0] - 2) <= 1e-10


class TestInvariants:
    def test_step_back_restores_last_accepted(self):
        h = trackable_homotopy(10, 2)
        tracker = PathTracker(h, TrackerConfig(max_step=0.1, newton=NewtonConfig(1e-8, 2)))
        digest, checks = tracker._digest, []

        def spy(out):
            before = (tracker._t, tracker._z.tobytes())
            digest(out)
            if not out.success:
                checks.append((tracker._t, tracker._z.tobytes()) == before)

        tracker._digest = spy
        with tracker:
            r = tracker.track()
        assert checks and all(checks)
        assert r.stats.successful_corrections < r.stats.total_corrections

    def test_monotone_and_bounded(self):
        r = track_path(trackable_homotopy(10, 2), TrackerConfig(max_step=0.05))
        s = r.stats
        assert s.successful_corrections <= s.total_corrections
        assert min(s.accepted_steps) > 0 and s.min_step <= s.avg_step
        assert s.avg_step == pytest.approx(np.mean(s.accepted_steps))
        t = 0.0
        for step in s.accepted_steps:
            t_new = min(t + step, 1.0)
            assert t_new > t
            t = t_new
        assert t == 1.0 == r.reached_t

    def test_endpoint_verified(self):
        h = trackable_homotopy(10, 2)
        r = track_path(h)
        assert not r.fail
        check = newton_correct(h, r.z, 1.0, NewtonConfig(1e-8, 1))
        assert check.iterations == 0 and check.success

    def test_budget_respected(self):
        r = track_path(trackable_homotopy(10, 2), TrackerConfig(max_corrections=5))
        assert r.fail and r.reason == "correction budget exhausted"
        assert r.stats.total_corrections <= 6

    def test_nonfinite_is_a_failed_path(self):
        r = track_path(quadratic_homotopy(), z0=[0.0])
        assert r.fail and np.isfinite(r.endpoint).all()

    def test_repeated_runs_identical(self):
        h = trackable_homotopy(10, 2)
        assert track_path(h).fingerprint() == track_path(h).fingerprint()

    @pytest.mark.parametrize("precision", list(PrecisionLevel), ids=lambda p: p.value)
    def test_worker_count_invariance(self, precision):
        h = trackable_homotopy(10, 2, precision)
        prints = {p: track_path(h, TrackerConfig(precision=precision, workers=p)).fingerprint() for p in (1, 2, 4, 8)}
        assert len(set(prints.values())) == 1


class TestLifecycle:
    def test_team_survives_many_cycles(self):
        cfg = TrackerConfig(initial_step=1e-4, max_step=1e-4, workers=2)
        with WorkerTeam(2) as team:
            tracker = PathTracker(quadratic_homotopy(), cfg, team)
            r = tracker.track()
            assert not r.fail and r.stats.total_corrections >= 10_000
            assert team.threads_started == 1 and team.runs == 1
            assert team.crossings["predict"] == r.stats.total_corrections + 1
            r2 = tracker.track()
            assert r2.fingerprint() == r.fingerprint() and team.threads_started == 1
