import numpy as np
import pytest

from mswpt.channel import (
    ChannelRealization,
    HardenMode,
    PowerDelayProfile,
    PropagationConfig,
    gen_hardened,
    gen_realization,
    load_pdp,
    path_loss_db,
    tone_grid,
)


class TestPathLoss:
    def test_ten_metres(self):
        assert path_loss_db(10.0) == pytest.approx(60.046, abs=5e-4)

    def test_one_metre(self):
        assert path_loss_db(1.0) == pytest.approx(40.046, abs=5e-4)

    def test_twenty_metres(self):
        # two-user region scenario quotes 66.07 dB at 20 m
        assert path_loss_db(20.0) == pytest.approx(66.07, abs=5e-3)

    def test_beyond_breakpoint_slope(self):
        assert path_loss_db(40.0) - path_loss_db(20.0) == pytest.approx(35 * np.log10(2), rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            path_loss_db(0.0)


class TestToneGrid:
    def test_single(self):
        np.testing.assert_array_equal(tone_grid(2.4e9, 10e6, 1), [2.4e9])

    def test_two(self):
        np.testing.assert_allclose(tone_grid(2.4e9, 10e6, 2), [2.4e9 - 2.5e6, 2.4e9 + 2.5e6])

    def test_span(self):
        f = tone_grid(2.4e9, 10e6, 8)
        assert f[-1] - f[0] == pytest.approx(8.75e6)
        np.testing.assert_allclose(np.diff(f), 1.25e6)

    def test_rejects_grid_below_half_span(self):
        with pytest.raises(ValueError):
            tone_grid(1e6, 10e6, 8)


class TestPowerDelayProfile:
    def test_bundled_profile_normalized(self):
        prof = load_pdp("tgn_e")
        assert prof.powers.sum() == pytest.approx(1.0)
        assert 10 * np.log10(prof.gain) == pytest.approx(7.65, abs=0.01)
        assert np.all(np.diff(prof.delays) >= 0)

    def test_round_trip(self):
        prof = load_pdp("tgn_e")
        again = PowerDelayProfile.parse(prof.dumps())
        np.testing.assert_allclose(again.delays, prof.delays)
        np.testing.assert_allclose(again.powers, prof.powers, rtol=1e-9)
        assert again.gain == pytest.approx(prof.gain, rel=1e-9)

    def test_malformed_line(self):
        with pytest.raises(ValueError):
            PowerDelayProfile.parse("0,1,2\n")

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            load_pdp("no-such-profile")

    def test_file_profile(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("# two taps\n0,0\n100,-3\n")
        prof = load_pdp(str(path))
        assert prof.delays.size == 2 and prof.name == "two"


class TestPropagationConfig:
    def test_distance_broadcast(self):
        cfg = PropagationConfig(n_users=3, distance_m=10.0)
        assert cfg.distance_m == (10.0, 10.0, 10.0)

    def test_distance_count_mismatch(self):
        with pytest.raises(ValueError):
            PropagationConfig(n_users=3, distance_m=(10.0, 20.0))

    def test_rejects_zero_dimension(self):
        with pytest.raises(ValueError):
            PropagationConfig(n_tones=0)

    def test_path_gain_with_antenna_gains(self):
        cfg = PropagationConfig(tx_gain_db=3.0, rx_gain_db=2.0)
        assert 10 * np.log10(cfg.path_gains()[0]) == pytest.approx(5.0 - 60.046, abs=5e-4)


class TestGenRealization:
    def test_deterministic(self):
        cfg = PropagationConfig(n_tones=4, n_antennas=3, n_users=2, seed=9)
        a, b = gen_realization(cfg, 5), gen_realization(cfg, 5)
        assert a.h.tobytes() == b.h.tobytes()

    def test_trials_differ(self):
        cfg = PropagationConfig(n_tones=4, n_antennas=2)
        assert not np.allclose(gen_realization(cfg, 0).h, gen_realization(cfg, 1).h)

    def test_layout(self):
        cfg = PropagationConfig(n_tones=3, n_antennas=2, n_users=2)
        ch = gen_realization(cfg)
        assert ch.h.shape == (2, 6)
        for q in range(2):
            for i in range(3):
                for a in range(2):
                    assert ch.tones[q, i, a] == ch.h[q, i * 2 + a]
        assert np.all(np.isfinite(ch.h))

    def test_flat_profile_is_frequency_flat(self):
        ch = gen_realization(PropagationConfig(n_tones=8, n_antennas=3, pdp_id="flat"))
        mags = np.abs(ch.tones[0])
        np.testing.assert_allclose(mags, np.broadcast_to(mags[0], mags.shape), rtol=1e-12)

    def test_normalized_average_power_equals_path_gain(self):
        cfg = PropagationConfig(n_tones=4, n_antennas=25, normalize_pdp=True, seed=1)
        lam = cfg.path_gains()[0]
        power = np.mean([np.mean(np.abs(gen_realization(cfg, t).h) ** 2) for t in range(100)])
        assert power == pytest.approx(lam, rel=0.03)

    def test_default_average_power_includes_multipath_gain(self):
        cfg = PropagationConfig(n_tones=4, n_antennas=25, seed=2)
        ch0 = gen_realization(cfg)
        power = np.mean([np.mean(np.abs(gen_realization(cfg, t).h) ** 2) for t in range(100)])
        assert ch0.path_gain[0] == pytest.approx(cfg.path_gains()[0] * load_pdp("tgn_e").gain)
        assert power == pytest.approx(ch0.path_gain[0], rel=0.03)

    def test_energy_over_tones(self):
        cfg = PropagationConfig(n_tones=8, n_antennas=1, normalize_pdp=True, seed=4)
        lam = cfg.path_gains()[0]
        tot = np.mean([np.sum(np.abs(gen_realization(cfg, t).h) ** 2) for t in range(2000)])
        assert tot == pytest.approx(8 * lam, rel=0.05)

    def test_user_substreams_isolated(self):
        base = PropagationConfig(n_tones=4, n_antennas=2, n_users=2, distance_m=(10.0, 10.0))
        other = PropagationConfig(n_tones=4, n_antennas=2, n_users=2, distance_m=(10.0, 15.0))
        a, b = gen_realization(base), gen_realization(other)
        np.testing.assert_array_equal(a.h[0], b.h[0])
        assert not np.allclose(a.h[1], b.h[1])
        # same small-scale fading, different scale
        np.testing.assert_allclose(b.h[1] / a.h[1], np.sqrt(b.path_gain[1] / a.path_gain[1]))

    def test_antenna_substreams_nested(self):
        a = gen_realization(PropagationConfig(n_tones=4, n_antennas=2))
        b = gen_realization(PropagationConfig(n_tones=4, n_antennas=5))
        np.testing.assert_array_equal(a.tones[0], b.tones[0][:, :2])

    def test_csv_round_trip(self):
        ch = gen_realization(PropagationConfig(n_tones=3, n_antennas=2, n_users=2))
        back = ChannelRealization.from_csv(ch.to_csv(), path_gain=ch.path_gain)
        np.testing.assert_array_equal(back.h, ch.h)

    def test_subset(self):
        ch = gen_realization(PropagationConfig(n_tones=2, n_antennas=2, n_users=3))
        sub = ch.subset([2, 0])
        np.testing.assert_array_equal(sub.h, ch.h[[2, 0]])
        assert sub.k == 2


class TestGenHardened:
    def test_exact_single(self):
        ch = gen_hardened([2e-5], m=4, n=1)
        assert np.sum(np.abs(ch.h) ** 2) / 4 == pytest.approx(2e-5)
        assert np.count_nonzero(ch.h) == 1

    def test_exact_cross_products_vanish(self):
        ch = gen_hardened([1e-5, 3e-5], m=8, n=2)
        vecs = [(q, i, ch.tones[q, i]) for q in range(2) for i in range(2)]
        for qa, ia, va in vecs:
            for qb, ib, vb in vecs:
                ip = va @ vb.conj() / 8
                if (qa, ia) == (qb, ib):
                    assert ip == pytest.approx(ch.path_gain[qa])
                else:
                    assert ip == 0

    def test_exact_needs_enough_antennas(self):
        with pytest.raises(ValueError):
            gen_hardened([1.0, 1.0], m=3, n=2)

    def test_gaussian_concentration(self):
        lam = 1e-5
        ok = 0
        for trial in range(100):
            ch = gen_hardened([lam, lam], m=256, n=2, mode=HardenMode.GAUSSIAN, seed=3, trial=trial)
            t = ch.tones.reshape(4, 256)
            g = np.abs(t @ t.conj().T) / 256
            off = g[~np.eye(4, dtype=bool)].max()
            ok += off <= 0.2 * lam
        assert ok >= 95

    def test_rejects_nonpositive_gain(self):
        with pytest.raises(ValueError):
            gen_hardened([0.0], m=2, n=1)
