import numpy as np
import pytest

from atofms.baselines import SpectrumEstimate, average_scans, naive_atof
from atofms.model import ModelParams
from atofms.preprocess import DetectionParams, detect_events, events_to_context
from atofms.schedule import FiringSchedule, generate_schedule
from atofms.simulate import GroundTruthSpec, simulate_acquisition, synthetic_peaks
from atofms.solver import SolverParams, assign_events, reconstruct


class TestAverageScans:
    def test_single_scan_is_identity(self):
        scan = np.array([0.0, 1.0, 2.0])
        assert np.array_equal(average_scans(scan[None, :]).values, scan)

    def test_constant_scans(self):
        scans = np.full((7, 5), 3.25)
        assert np.array_equal(average_scans(scans).values, np.full(5, 3.25))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            average_scans(np.zeros((0, 4)))

    def test_matches_reconstruction_at_acceleration_one(self):
        n, n_scans = 800, 8
        spec = GroundTruthSpec(peaks=synthetic_peaks(n, 6, seed=21), n=n)
        sched = generate_schedule(n, n_scans, n, n, seed=22)
        acq = simulate_acquisition(spec, sched, ModelParams(mu=225.0), seed=23)
        tiny = 1e-9
        spectrum, _ = reconstruct(
            acq.trace,
            sched,
            DetectionParams(h0=tiny, hw=tiny, d_min=1),
            ModelParams(mu=225.0, w0=1.0),
            SolverParams(theta0=0.0, max_iters=5),
        )
        np.testing.assert_allclose(
            spectrum.values, average_scans(acq.scans).values, rtol=1e-6, atol=1e-12
        )


class TestNaiveAtof:
    def test_degree_one_equals_assignment(self):
        sched = FiringSchedule(tau=np.array([0]), n=30)
        y = np.zeros(30)
        y[4:7] = [2.0, 5.0, 2.0]
        y[20:22] = [3.0, 3.0]
        events = detect_events(y, DetectionParams(h0=1, hw=2, d_min=1))
        ctx = events_to_context(events, sched)
        naive = naive_atof(events, sched)
        assigned = assign_events(ctx, events, sched, np.zeros(30))
        np.testing.assert_allclose(naive.values, assigned.values / sched.n_scans)

    def test_two_placements_split_half(self):
        sched = FiringSchedule(tau=np.array([0, 5]), n=8)
        y = np.zeros(13)
        y[6:8] = [4.0, 2.0]
        events = detect_events(y, DetectionParams(h0=1, hw=2, d_min=1))
        naive = naive_atof(events, sched)
        # candidates: bins 6-7 of scan 0, bins 1-2 of scan 1; half weight each
        expected = np.zeros(8)
        expected[6:8] = [2.0, 1.0]
        expected[1:3] = [2.0, 1.0]
        np.testing.assert_allclose(naive.values, expected / sched.n_scans)

    def test_mass_conservation(self):
        from atofms.preprocess import EventList
        from atofms.schedule import event_neighbors

        spec = GroundTruthSpec(peaks=synthetic_peaks(1500, 10, seed=31), n=1500)
        sched = generate_schedule(1500, 12, 1, 400, seed=32)
        acq = simulate_acquisition(spec, sched, ModelParams(), seed=33)
        events = detect_events(acq.trace, DetectionParams(h0=1, hw=2, d_min=2))
        # conservation is exact for events none of whose placements are
        # clipped at the spectrum edges
        clean = tuple(
            ev
            for ev in events.events
            if all(
                hi - lo == ev.t_end - ev.t_start
                for _, lo, hi in event_neighbors(sched, ev.t_start, ev.t_end)
            )
        )
        assert clean
        filtered = EventList(events=clean, total_samples=events.total_samples)
        naive = naive_atof(filtered, sched)
        total_z = sum(ev.z for ev in clean)
        assert naive.values.sum() == pytest.approx(total_z / sched.n_scans, rel=1e-9)

    def test_per_sample_variant_matches_on_single_sample_events(self):
        sched = FiringSchedule(tau=np.array([0, 3, 5]), n=6)
        y = np.zeros(11)
        y[4] = 5.0
        y[8] = 2.0
        events = detect_events(y, DetectionParams(h0=1, hw=1, d_min=1))
        event_level = naive_atof(events, sched)
        sample_level = naive_atof(events, sched, per_sample=True)
        np.testing.assert_allclose(event_level.values, sample_level.values)

    def test_never_sparser_than_assignment(self):
        spec = GroundTruthSpec(peaks=synthetic_peaks(1200, 8, seed=41), n=1200)
        sched = generate_schedule(1200, 10, 1, 300, seed=42)
        acq = simulate_acquisition(spec, sched, ModelParams(), seed=43)
        events = detect_events(acq.trace, DetectionParams(h0=1, hw=2, d_min=2))
        ctx = events_to_context(events, sched)
        rng = np.random.default_rng(44)
        naive = naive_atof(events, sched)
        assigned = assign_events(ctx, events, sched, rng.exponential(1.0, size=1200))
        assert np.count_nonzero(naive.values) >= np.count_nonzero(assigned.values)


class TestSpectrumEstimate:
    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            SpectrumEstimate(values=np.array([-1.0, 1.0]))

    def test_records_method_and_provenance(self):
        est = SpectrumEstimate(values=np.zeros(3), method="x", provenance={"a": "1"})
        assert est.method == "x"
        assert est.provenance == {"a": "1"}
        assert est.n == 3
