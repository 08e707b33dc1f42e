import numpy as np
import pytest

from murim.attacks import MPA, NGA, NONE, AttackConfig, apply_attack, noisy, poison
from murim.contribution import score
from murim.errors import ConfigError


def test_poison_negation():
    u = np.array([1.5, -2.0])
    np.testing.assert_array_equal(poison(u, 1.0), -u)


def test_poison_hand_value():
    np.testing.assert_array_equal(poison(np.array([1.0, -1.0]), 2.0), [-2.0, 2.0])


def test_poison_norm_and_cosine():
    u = np.random.default_rng(0).standard_normal(10)
    p = poison(u, 3.0)
    assert np.linalg.norm(p) == pytest.approx(3 * np.linalg.norm(u))
    assert score(p, u).cosine == pytest.approx(-1.0)


def test_noisy_limit_and_seed():
    u = np.ones(4)
    np.testing.assert_allclose(noisy(u, 1e-12, seed=1), u, atol=1e-10)
    assert noisy(u, 1.0, 2).tobytes() == noisy(u, 1.0, 2).tobytes()


def test_noisy_monte_carlo_std():
    u = np.zeros(100_000)
    assert abs((noisy(u, 0.7, seed=3) - u).std() / 0.7 - 1) < 0.02


def test_apply_dispatch():
    u = np.array([1.0, 2.0])
    np.testing.assert_array_equal(apply_attack(u, AttackConfig(NONE), 0), u)
    np.testing.assert_array_equal(apply_attack(u, AttackConfig(MPA, mpa_scale=2), 0), -2 * u)
    assert not np.array_equal(apply_attack(u, AttackConfig(NGA), 0), u)


@pytest.mark.parametrize("kw", [{"kind": "krum"}, {"mpa_scale": 0}, {"nga_sigma": -1}, {"attacker_fraction": 1.2}])
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        AttackConfig(**kw)


def test_invalid_params():
    with pytest.raises(ConfigError):
        poison(np.ones(2), 0)
    with pytest.raises(ConfigError):
        noisy(np.ones(2), 0, 0)
