import numpy as np
import pytest

from idlma.network import MlpNetwork
from idlma.source_models import (
    DnnModel,
    FloorPolicy,
    NmfFactors,
    NmfModel,
    OracleModel,
    UnsupportedDomainError,
    estimate_variance,
    nmf_model_update,
    random_nmf_factors,
)
from idlma.stft import ComplexSpectrogram, StftConfig
from oracles import itakura_saito


def spectrogram(values):
    values = np.asarray(values, dtype=complex)
    n_bins = values.shape[0]
    return ComplexSpectrogram(values, StftConfig(2 * (n_bins - 1), n_bins - 1))


def random_spectrogram(rng, n_bins=9, n_frames=12):
    vals = rng.standard_normal((n_bins, n_frames)) + 1j * rng.standard_normal((n_bins, n_frames))
    return spectrogram(vals)


class TestFloorPolicy:
    def test_fixed_dominates_zero_output(self):
        spec = spectrogram(np.zeros((5, 4)))
        model = OracleModel(spec)
        sigma = estimate_variance(model, spec, FloorPolicy.fixed(1e-3))
        assert np.all(sigma == 1e-3)

    def test_relative_rule(self):
        # mean pre-floor magnitude 0.5 -> floor at 0.05
        mags = np.full((4, 5), 0.5)
        mags[0, 0] = 0.01
        mags[1, 1] = 0.99
        ref = spectrogram(mags)
        sigma = estimate_variance(OracleModel(ref), ref, FloorPolicy.relative(0.1))
        eps = 0.1 * mags.mean()
        assert np.all(sigma >= eps)
        assert sigma[0, 0] == pytest.approx(eps)
        assert sigma[1, 1] == pytest.approx(0.99)

    def test_idempotent(self, rng):
        ref = random_spectrogram(rng)
        floor = FloorPolicy.relative(0.1)
        once = estimate_variance(OracleModel(ref), ref, floor)
        # feeding the floored output back through the same clamp changes nothing
        assert np.array_equal(np.maximum(once, floor.floor_value(np.abs(ref.values))), once)

    def test_validation(self):
        with pytest.raises(ValueError):
            FloorPolicy("loose", 0.1)
        with pytest.raises(ValueError):
            FloorPolicy.fixed(-1.0)


class TestOracleModel:
    def test_identity(self, rng):
        spec = random_spectrogram(rng)
        sigma = estimate_variance(OracleModel(spec), spec, FloorPolicy.fixed(1e-12))
        assert np.allclose(sigma, np.abs(spec.values))

    def test_scaling(self, rng):
        spec = random_spectrogram(rng)
        doubled = spectrogram(2.0 * spec.values)
        assert np.allclose(
            OracleModel(doubled).infer(spec), 2.0 * OracleModel(spec).infer(spec)
        )

    def test_zero_reference_floors(self):
        zero = spectrogram(np.zeros((5, 4)))
        sigma = estimate_variance(OracleModel(zero), zero, FloorPolicy.fixed(2e-3))
        assert np.all(sigma == 2e-3)

    def test_shape_mismatch(self, rng):
        ref = random_spectrogram(rng, n_bins=9, n_frames=4)
        other = random_spectrogram(rng, n_bins=9, n_frames=6)
        with pytest.raises(ValueError):
            estimate_variance(OracleModel(ref), other, FloorPolicy.fixed(1e-12))


class TestNmfUpdate:
    def test_fixed_point_k1(self, rng):
        # TV already equal to |Y|^2: the multiplicative factors are exactly 1
        t = rng.random((6, 1)) + 0.5
        v = rng.random((1, 8)) + 0.5
        power = t @ v
        spec = spectrogram(np.sqrt(power))
        factors = NmfFactors(t, v)
        updated = nmf_model_update(factors, spec)
        assert np.allclose(updated.basis, t, atol=1e-10)
        assert np.allclose(updated.activation, v, atol=1e-10)

    def test_divergence_non_increasing(self, rng):
        # rank-1 power spectrogram, random init, IS divergence tracked externally
        t_true = rng.random(7) + 0.2
        v_true = rng.random(9) + 0.2
        power = np.outer(t_true, v_true)
        spec = spectrogram(np.sqrt(power))
        factors = random_nmf_factors(7, 9, 2, rng)
        previous = itakura_saito(power, factors.low_rank_model())
        for _ in range(100):
            factors = nmf_model_update(factors, spec)
            current = itakura_saito(power, factors.low_rank_model())
            assert current <= previous + 1e-9
            previous = current

    def test_gauss_objective_non_increasing(self, rng):
        # the spectrogram-model part of the Gaussian cost, 100 random instances
        for trial in range(100):
            local = np.random.default_rng(trial)
            y = local.standard_normal((5, 6)) + 1j * local.standard_normal((5, 6))
            spec = spectrogram(y)
            factors = random_nmf_factors(5, 6, 2, local)

            def objective(f):
                sigma = np.sqrt(f.low_rank_model())
                return float(np.sum(np.abs(y) ** 2 / sigma**2 + 2.0 * np.log(sigma)))

            before = objective(factors)
            after = objective(nmf_model_update(factors, spec))
            assert after <= before + 1e-9

    def test_zero_spectrogram_collapses_to_floor(self, rng):
        spec = spectrogram(np.zeros((4, 5)))
        factors = random_nmf_factors(4, 5, 2, rng)
        for _ in range(200):
            factors = nmf_model_update(factors, spec)
        assert factors.low_rank_model().max() < 1e-6

    def test_domain_power_guard(self, rng):
        factors = NmfFactors(rng.random((4, 2)) + 0.1, rng.random((2, 5)) + 0.1, domain_power=1)
        with pytest.raises(UnsupportedDomainError):
            nmf_model_update(factors, spectrogram(np.ones((4, 5))))

    def test_uniform_init_range(self, rng):
        factors = random_nmf_factors(30, 40, 3, rng)
        for arr in (factors.basis, factors.activation):
            assert np.all(arr > 0.0)
            assert np.all(arr <= 1.0)


class TestDnnModel:
    def test_passthrough_network(self, rng):
        # single layer selecting the center frame of a context-1 input
        n_bins = 5
        weights = np.zeros((n_bins, 3 * n_bins))
        weights[:, n_bins : 2 * n_bins] = np.eye(n_bins)
        net = MlpNetwork([(weights, np.zeros(n_bins))], freq_bins=n_bins, context=1, delta2=0.0)
        spec = random_spectrogram(rng, n_bins=n_bins, n_frames=8)
        out = DnnModel(net).infer(spec)
        assert np.allclose(out, np.abs(spec.values), rtol=1e-12)

    def test_zero_network_floors(self, rng):
        n_bins = 4
        net = MlpNetwork(
            [(np.zeros((n_bins, n_bins)), np.zeros(n_bins))],
            freq_bins=n_bins, context=0, delta2=1e-5,
        )
        spec = random_spectrogram(rng, n_bins=n_bins)
        sigma = estimate_variance(DnnModel(net), spec, FloorPolicy.fixed(1e-3))
        assert np.all(sigma == 1e-3)

    def test_output_nonnegative(self, rng):
        net = MlpNetwork(
            [(rng.standard_normal((5, 9)), rng.standard_normal(5)),
             (rng.standard_normal((3, 5)), rng.standard_normal(3))],
            freq_bins=3, context=1, delta2=1e-5,
        )
        out = DnnModel(net).infer(random_spectrogram(rng, n_bins=3))
        assert np.all(out >= 0.0)

    def test_bin_mismatch(self, rng):
        net = MlpNetwork(
            [(np.zeros((3, 3)), np.zeros(3))], freq_bins=3, context=0, delta2=0.0
        )
        with pytest.raises(ValueError):
            DnnModel(net).infer(random_spectrogram(rng, n_bins=5))
