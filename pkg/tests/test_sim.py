import math

import numpy as np
import pytest

from stlink.errors import ConfigError
from stlink.fec import InterleaverSpec, SccCode
from stlink.modem import Constellation, ebn0_to_esn0, qam_demod_hard, qam_modulate
from stlink.sim import (
    LinkConfig,
    StopRule,
    TrialResult,
    ber_sweep,
    ber_upper_bound,
    constellation_capture,
    frame_seed,
    make_point,
    run_link_trial,
    transmit_blocks,
)
from stlink.stbc import G2

SMALL = SccCode(interleaver=InterleaverSpec(512, 1))


class TestLinkConfig:
    def test_defaults(self):
        cfg = LinkConfig()
        assert cfg.info_bits == 2046
        assert cfg.code_rate == pytest.approx(2046 / 6150)
        assert cfg.modulation_rate == cfg.code_rate

    def test_g3_rate(self):
        cfg = LinkConfig(stbc="g3", n_rx=2)
        assert cfg.modulation_rate == pytest.approx(0.5 * 2046 / 6150)

    @pytest.mark.parametrize(
        "kw,field",
        [
            ({"coding": "ldpc"}, "fec.coding"),
            ({"channel": "rician"}, "channel.model"),
            ({"fading": "fast"}, "channel.fading"),
            ({"n_rx": 0}, "channel.n_rx"),
            ({"iterations": 0}, "fec.iterations"),
            ({"channel": "geometric"}, "channel.paths"),
            ({"frame_bits": 5000}, "sweep.frame_bits"),
            ({"stbc": "g9"}, "stbc.scheme"),
        ],
    )
    def test_invalid(self, kw, field):
        with pytest.raises(ConfigError) as e:
            LinkConfig(**kw)
        assert e.value.field == field


class TestTrial:
    @pytest.mark.parametrize("stbc,n_rx", [("none", 1), ("g2", 1), ("g2", 2), ("g3", 2)])
    @pytest.mark.parametrize("coding", ["none", "scc"])
    def test_noiseless_error_free(self, stbc, n_rx, coding):
        cfg = LinkConfig(coding=coding, code=SMALL, stbc=stbc, n_rx=n_rx, iterations=2,
                         frame_bits=None if coding == "scc" else 1000)
        res = run_link_trial(cfg, 0.0, 3, noiseless=True)
        assert res.errors == 0 and res.tx_bits.size == cfg.info_bits

    def test_padding_excluded(self):
        cfg = LinkConfig(coding="scc", code=SMALL, frame_bits=100, iterations=2)
        res = run_link_trial(cfg, 2.0, 5)
        assert res.tx_bits.size == 100 and res.rx_bits.size == 100

    def test_uncoded_chain_matches_modem(self):
        # the link trial must reduce to plain modulate + AWGN + slice
        cfg = LinkConfig(coding="none", stbc="none", channel="awgn", frame_bits=4000)
        seed = frame_seed(9, 0, 0)
        res = run_link_trial(cfg, 6.0, seed)
        rng = np.random.default_rng(frame_seed(9, 0, 0))
        c = Constellation(16)
        info = rng.integers(0, 2, 4000, dtype=np.uint8)
        x = qam_modulate(info, c)
        nv = 1.0 / float(ebn0_to_esn0(6.0, 4))
        shape = (x.size, 1, 1)
        noise = np.sqrt(nv / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        y = x + noise.reshape(-1)
        assert np.array_equal(res.tx_bits, info)
        assert np.array_equal(res.rx_bits, qam_demod_hard(y, c))

    def test_reproducible(self):
        cfg = LinkConfig(code=SMALL, iterations=2)
        a = run_link_trial(cfg, 3.0, frame_seed(1, 2, 3))
        b = run_link_trial(cfg, 3.0, frame_seed(1, 2, 3))
        assert np.array_equal(a.rx_bits, b.rx_bits) and np.array_equal(a.tx_bits, b.tx_bits)

    def test_geometric(self):
        H = np.array([[1.0, 0.5j]])
        cfg = LinkConfig(coding="none", stbc="g2", channel="geometric", channel_matrix=H, frame_bits=800)
        assert run_link_trial(cfg, 5.0, 1, noiseless=True).errors == 0

    def test_effective_noise(self):
        # statistic noise variance reported by the combiner matches the empirical one
        cfg = LinkConfig(coding="none", stbc="g2", channel="awgn")
        rng = np.random.default_rng(4)
        x = Constellation(16).points[rng.integers(0, 16, 200_000)]
        z, nv_eff, _ = transmit_blocks(cfg, x, 4.0, rng)
        assert np.var(z - x) == pytest.approx(nv_eff[0], rel=0.02)


class TestSweep:
    def test_stop_rule_validation(self):
        with pytest.raises(ConfigError):
            StopRule(min_errors=0)
        with pytest.raises(ConfigError):
            StopRule(batch_frames=0)

    def test_empty_list(self):
        with pytest.raises(ConfigError):
            ber_sweep(LinkConfig(), [])

    def test_counts_and_stop(self):
        calls = []

        def fake(cfg, ebn0, seed):
            calls.append(ebn0)
            tx = np.zeros(10, np.uint8)
            rx = tx.copy()
            rx[:3] = 1
            return TrialResult(tx, rx, {})

        pts = ber_sweep(LinkConfig(), [1.0, 2.0], StopRule(min_errors=20, batch_frames=4), trial=fake)
        # 3 errors per frame, batches of 4 frames -> stop after 8 frames
        assert [p.frames for p in pts] == [8, 8]
        assert pts[0].errors == 24 and pts[0].bits == 80
        assert pts[0].ber == pytest.approx(0.3) and not pts[0].censored

    def test_censored(self):
        def clean(cfg, ebn0, seed):
            return TrialResult(np.zeros(1000, np.uint8), np.zeros(1000, np.uint8), {})

        pt = ber_sweep(LinkConfig(), [9.0], StopRule(max_bits=10_000, batch_frames=2), trial=clean)[0]
        assert pt.censored and pt.errors == 0 and pt.bits == 10_000
        # zero errors: upper bound is 1 - 0.05**(1/n) ~ 3/n
        assert pt.ber == pytest.approx(1 - 0.05 ** (1 / 10_000), rel=1e-6)
        assert pt.as_row()["censored"] == 1

    def test_upper_bound_monotone(self):
        assert ber_upper_bound(0, 1000) < ber_upper_bound(1, 1000) < ber_upper_bound(5, 1000)
        assert ber_upper_bound(10, 10) == 1.0

    def test_point_ci(self):
        p = make_point(5.0, 3, 1000, 100, False)
        assert p.ci95 == pytest.approx(1.96 * math.sqrt(0.1 * 0.9 / 1000))

    def test_thread_independent(self):
        cfg = LinkConfig(coding="none", stbc="g2", frame_bits=512)
        stop = StopRule(min_errors=50, max_bits=200_000, batch_frames=4)
        a = ber_sweep(cfg, [5.0, 10.0], stop, master_seed=3, threads=1)
        b = ber_sweep(cfg, [5.0, 10.0], stop, master_seed=3, threads=3)
        assert [p.as_row() for p in a] == [p.as_row() for p in b]

    def test_progress_callback(self):
        seen = []
        cfg = LinkConfig(coding="none", stbc="none", channel="awgn", frame_bits=64)
        ber_sweep(cfg, [0.0, 1.0], StopRule(min_errors=5), progress=seen.append)
        assert [p.ebn0_db for p in seen] == [0.0, 1.0]


class TestCapture:
    def test_noiseless(self):
        cfg = LinkConfig(coding="none", stbc="g2", n_rx=2)
        rec = constellation_capture(cfg, 10.0, 101, 1, noiseless=True)
        assert len(rec) == 101
        assert np.allclose(rec.statistic, rec.tx, atol=1e-12)
        assert np.all(rec.gain > 0)
        assert set(rec.rows()[0]) == {"re", "im", "tx_re", "tx_im", "gain"}

    def test_noise_scales_with_gain(self):
        cfg = LinkConfig(coding="none", stbc="g3", n_rx=1)
        rec = constellation_capture(cfg, 10.0, 4000, 2)
        assert np.allclose(rec.noise_variance * rec.gain, rec.noise_variance[0] * rec.gain[0])

    def test_needs_stbc(self):
        with pytest.raises(ConfigError):
            constellation_capture(LinkConfig(stbc="none"), 10.0, 10, 1)

    def test_empty(self):
        assert len(constellation_capture(LinkConfig(coding="none", stbc="g2"), 10.0, 0, 1)) == 0
