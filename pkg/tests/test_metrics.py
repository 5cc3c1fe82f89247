import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmsdi.core import AudioTensor
from gmsdi.errors import DimensionError, UndefinedMetricError
from gmsdi.eval import SI_SDR_CAP, SeparationReport, bandpass_separate, separation_report, si_sdr, si_sdr_improvement
from gmsdi.data_io import synth_stem


def _scripted_si_sdr(est, ref):
    # straight from the definition, no shared code
    est, ref = np.asarray(est, float).ravel(), np.asarray(ref, float).ravel()
    alpha = est.dot(ref) / ref.dot(ref)
    target = alpha * ref
    return 10 * np.log10(target.dot(target) / (target - est).dot(target - est))


def _orthogonal_noise(ref, ratio, seed=0):
    n = np.random.default_rng(seed).standard_normal(ref.shape)
    n -= n.dot(ref) / ref.dot(ref) * ref
    return n * np.sqrt(ref.dot(ref) / ratio / n.dot(n))


class TestSiSdr:
    ref = np.sin(np.linspace(0, 20, 500))

    def test_identity_hits_the_cap(self):
        assert si_sdr(AudioTensor(self.ref), AudioTensor(self.ref)) == SI_SDR_CAP == 100.0

    def test_scaled_reference_hits_the_cap(self):
        assert si_sdr(AudioTensor(2 * self.ref), AudioTensor(self.ref)) == 100.0

    def test_orthogonal_noise_is_ten_db(self):
        est = self.ref + _orthogonal_noise(self.ref, 10.0)
        assert si_sdr(AudioTensor(est), AudioTensor(self.ref)) == pytest.approx(10.0, abs=1e-6)

    def test_lower_cap(self):
        est = _orthogonal_noise(self.ref, 1.0)
        assert si_sdr(AudioTensor(est), AudioTensor(self.ref)) == -100.0

    @settings(max_examples=60, deadline=None)
    @given(scale=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3), seed=st.integers(0, 1000))
    def test_scale_invariance(self, scale, seed):
        rng = np.random.default_rng(seed)
        ref, est = rng.standard_normal(64), rng.standard_normal(64)
        a = si_sdr(AudioTensor(est), AudioTensor(ref))
        b = si_sdr(AudioTensor(scale * est), AudioTensor(ref))
        assert b == pytest.approx(a, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 1000))
    def test_matches_scripted_definition(self, seed):
        rng = np.random.default_rng(seed)
        ref = rng.standard_normal(128)
        est = ref + rng.uniform(0.01, 3) * rng.standard_normal(128)
        assert si_sdr(AudioTensor(est), AudioTensor(ref)) == pytest.approx(_scripted_si_sdr(est, ref), abs=1e-9)

    def test_silent_reference(self):
        with pytest.raises(UndefinedMetricError):
            si_sdr(AudioTensor([1.0, 2.0]), AudioTensor([0.0, 0.0]))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            si_sdr(AudioTensor([1.0, 2.0]), AudioTensor([1.0]))


class TestImprovement:
    def test_mixture_as_estimate_is_zero(self):
        rng = np.random.default_rng(1)
        ref, other = rng.standard_normal(100), rng.standard_normal(100)
        y = AudioTensor(ref + other)
        assert si_sdr_improvement(y, AudioTensor(ref), y) == 0.0

    def test_perfect_estimate(self):
        rng = np.random.default_rng(2)
        ref, other = rng.standard_normal(100), rng.standard_normal(100)
        y = AudioTensor(ref + other)
        gain = si_sdr_improvement(AudioTensor(ref), AudioTensor(ref), y)
        assert gain == pytest.approx(100.0 - _scripted_si_sdr(ref + other, ref), abs=1e-9)
        assert gain > 0

    def test_toy_band_disjoint_case(self):
        rng = np.random.default_rng(3)
        bass, drums = (synth_stem(l, rng, 4096, 8000) for l in ("bass", "drums"))
        y = AudioTensor(bass + drums)
        est = bandpass_separate(y, ["bass", "drums"])
        for e, ref in zip(est, (bass, drums)):
            expected = _scripted_si_sdr(e.samples, ref) - _scripted_si_sdr(bass + drums, ref)
            assert si_sdr_improvement(e, AudioTensor(ref), y) == pytest.approx(expected, abs=1e-9)
            assert expected > 10


def test_report_mean_is_arithmetic_mean():
    rows = [{"bass": 10.0, "drums": 4.0}, {"bass": 12.0}, {"piano": 7.5, "drums": 6.0}]
    rep = separation_report(rows, manifest="run.json")
    assert rep.per_source == {"bass": 11.0, "drums": 5.0, "piano": 7.5}
    assert rep.counts == {"bass": 2, "drums": 2, "piano": 1}
    assert rep.mean == pytest.approx((11.0 + 5.0 + 7.5) / 3, abs=1e-9)
    assert rep.as_dict()["run_manifest"] == "run.json"
    assert np.isnan(SeparationReport({}).mean)
