import itertools

import numpy as np
import pytest

from stlink.channel import rayleigh_realization
from stlink.errors import ConfigError, DegenerateChannelError
from stlink.modem import Constellation
from stlink.stbc import (
    G2,
    G3,
    ReceivedFrame,
    StbcScheme,
    apply_channel,
    combine,
    ml_metric,
    stbc_detect,
    stbc_encode,
)


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class TestSchemes:
    def test_shapes(self):
        assert (G2.n_tx, G2.slots, G2.symbols_per_block, G2.rate) == (2, 2, 2, 1.0)
        assert (G3.n_tx, G3.slots, G3.symbols_per_block, G3.rate) == (3, 8, 4, 0.5)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            StbcScheme("g4")
        with pytest.raises(ConfigError):
            StbcScheme("g2", "per-slot")


class TestEncode:
    def test_g2_table(self):
        x1, x2 = 1 + 2j, -0.5 + 1j
        want = np.array([[x1, x2], [-np.conj(x2), np.conj(x1)]])
        assert np.array_equal(stbc_encode([x1, x2], G2), want)

    def test_g2_identity(self):
        assert np.array_equal(stbc_encode([1, 0], G2), np.eye(2))

    def test_g3_table(self, rng):
        x = _cn(rng, 4)
        x1, x2, x3, x4 = x
        top = np.array([[x1, x2, x3], [-x2, x1, -x4], [-x3, x4, x1], [-x4, -x3, x2]])
        want = np.vstack([top, top.conj()])
        C = stbc_encode(x, G3)
        assert np.allclose(C, want, atol=0)
        assert np.array_equal(C[4], np.conj(x[:3]))

    def test_wrong_count(self):
        with pytest.raises(ValueError):
            stbc_encode([1, 2, 3], G2)

    @pytest.mark.parametrize("scheme,factor", [(G2, 1), (G3, 2)])
    def test_orthogonality(self, scheme, factor, rng):
        x = _cn(rng, 10_000, scheme.symbols_per_block) * 3
        C = stbc_encode(x, scheme)
        gram = np.einsum("bti,btj->bij", C.conj(), C)
        want = factor * np.sum(np.abs(x) ** 2, axis=1)[:, None, None] * np.eye(scheme.n_tx)
        assert np.max(np.abs(gram - want)) < 1e-12 * np.max(np.abs(want))

    def test_total_power_independent_of_ntx(self, rng):
        c = Constellation(16)
        pw = []
        for name in ("g2", "g3"):
            s = StbcScheme(name, "total")
            x = c.points[rng.integers(0, 16, (20_000, s.symbols_per_block))]
            pw.append(np.mean(np.sum(np.abs(stbc_encode(x, s)) ** 2, axis=-1)))
        # G3 repeats each symbol twice per block: per slot energy is still n_tx * amp^2
        assert np.allclose(pw, 1.0, rtol=0.02)

    def test_per_antenna_energy(self, rng):
        c = Constellation(16)
        x = c.points[rng.integers(0, 16, (20_000, 4))]
        C = stbc_encode(x, G3)
        assert np.allclose(np.mean(np.abs(C) ** 2, axis=(0, 1)), 1.0, rtol=0.02)


class TestChannel:
    def test_zero_snr(self):
        with pytest.raises(ValueError):
            apply_channel(np.eye(2), np.ones((1, 2)), 0.0, noiseless=True)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            apply_channel(np.eye(2), np.ones((1, 3)), 1.0, noiseless=True)

    def test_first_column(self, rng):
        C = stbc_encode(_cn(rng, 2), G2)
        H = np.array([[1.0, 0.0]])
        fr = apply_channel(C, H, 1.0, noiseless=True)
        assert np.array_equal(fr.r[:, 0], C[:, 0])

    def test_noise_variance(self, rng):
        n = 500_000
        C = np.zeros((n, 2, 2), dtype=complex)
        H = np.ones((1, 2))
        fr = apply_channel(C, H, 1.0, rng)
        r = fr.r.reshape(-1)
        assert fr.noise_variance == 2.0
        # n_tx / (2 SNR) = 1 per real dimension
        assert abs(np.var(r.real) - 1.0) < 0.01
        assert abs(np.var(r.imag) - 1.0) < 0.01


class TestMetric:
    def test_zero_on_truth(self, rng):
        C = stbc_encode(_cn(rng, 2), G2)
        H = _cn(rng, 2, 2)
        fr = apply_channel(C, H, 1.0, noiseless=True)
        assert ml_metric(fr, H, C) == pytest.approx(0, abs=1e-24)

    def test_nonnegative(self, rng):
        H = _cn(rng, 1, 2)
        fr = apply_channel(stbc_encode(_cn(rng, 2), G2), H, 3.0, rng)
        for _ in range(50):
            assert ml_metric(fr, H, stbc_encode(_cn(rng, 2), G2)) >= 0

    def test_shape_mismatch(self, rng):
        fr = ReceivedFrame(np.zeros((2, 1), complex), 1.0)
        with pytest.raises(ValueError):
            ml_metric(fr, np.ones((1, 2)), np.zeros((8, 2)))


def _brute_force(fr, H, scheme, c):
    cands = np.array(list(itertools.product(c.points, repeat=scheme.symbols_per_block)))
    blocks = stbc_encode(cands, scheme)
    return cands[np.argmin(ml_metric(fr, H, blocks))]


class TestDetect:
    def test_single_antenna_passthrough(self, rng):
        x = _cn(rng, 2)
        H = np.array([[1.0, 0.0]])
        fr = apply_channel(stbc_encode(x, G2), H, 1.0, noiseless=True)
        stats = combine(fr, H, G2)
        assert np.allclose(stats.statistic, x, atol=1e-15)
        assert stats.gain == pytest.approx(1.0)

    def test_g3_noiseless_recovery(self, rng):
        c = Constellation(16)
        for _ in range(20):
            x = c.points[rng.integers(0, 16, 4)]
            H = _cn(rng, 2, 3)
            fr = apply_channel(stbc_encode(x, G3), H, 1.0, noiseless=True)
            got, stats = stbc_detect(fr, H, G3, c)
            assert np.array_equal(got, x)
            assert np.allclose(stats.statistic / stats.gain, x, atol=1e-12)
            assert stats.gain == pytest.approx(2 * np.sum(np.abs(H) ** 2))

    def test_matches_brute_force_g2(self, rng):
        c = Constellation(16)
        for _ in range(1000):
            x = c.points[rng.integers(0, 16, 2)]
            H = rayleigh_realization(1, 2, rng)
            fr = apply_channel(stbc_encode(x, G2), H, 10 ** (12 / 10), rng)
            got, _ = stbc_detect(fr, H, G2, c)
            assert np.allclose(got, _brute_force(fr, H, G2, c))

    def test_matches_brute_force_g3(self, rng):
        c = Constellation(4)
        for _ in range(200):
            x = c.points[rng.integers(0, 4, 4)]
            H = rayleigh_realization(2, 3, rng)
            fr = apply_channel(stbc_encode(x, G3), H, 1.0, rng)
            got, _ = stbc_detect(fr, H, G3, c)
            assert np.allclose(got, _brute_force(fr, H, G3, c))

    def test_zero_channel(self):
        H = np.zeros((1, 2))
        fr = apply_channel(np.eye(2), H, 1.0, noiseless=True)
        with pytest.raises(DegenerateChannelError):
            stbc_detect(fr, H, G2, Constellation(4))

    @pytest.mark.parametrize("scheme", [G2, G3, StbcScheme("g2", "total")])
    def test_equivalent_gain_law(self, scheme, rng):
        # post-combining noise on statistic is nv * gain (complex), i.e. nv / gain after scaling
        H = _cn(rng, 2, scheme.n_tx)
        n = 40_000
        x = _cn(rng, n, scheme.symbols_per_block)
        fr = apply_channel(stbc_encode(x, scheme), H, 2.0, rng)
        stats = combine(fr, H, scheme)
        noise = stats.statistic - stats.gain * x
        assert np.var(noise) == pytest.approx(fr.noise_variance * stats.gain, rel=0.03)
