"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary
(and immediately with ``pytest -s``). Simulation results are cached so runs
shared between criteria execute once.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE
from murim.cli import main as cli_main
from murim.config import FEDAVG, RunConfig, with_overrides
from murim.dp import PrivacyParams, clip, gaussian_noise_sigma, privatize
from murim.incentive import IncentiveParams, incentive
from murim.latency import ResourceProfile, expected_latency, infer_resources
from murim.reputation import BandParams, Indicator, Opinion, classify_privacy_round, expectation, update_opinion
from murim.simulator import attack_experiment, run
from murim.sle import SleParams, leverage_scores, sle_weights
from test_reputation import IQR_FIXTURES, LABEL

SEEDS = range(5)


def record(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append((name, ok, detail))
    print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@lru_cache(maxsize=None)
def _summary(items: tuple):
    start = time.perf_counter()
    summary = run(with_overrides(RunConfig(), dict(items))).summary
    return summary, time.perf_counter() - start


def summary(**overrides):
    return _summary(tuple(sorted((k.replace("__", "."), v) for k, v in overrides.items())))


# --------------------------------------------------------------------------
# end-to-end criteria


def test_1_iid_liar_elimination():
    failures, slowest = [], 0.0
    for thr in (0.10, 0.15, 0.20, 0.25, 0.30, 0.35):
        elapsed = 0.0
        for seed in SEEDS:
            s, dt = summary(seed=seed, reputation__reliability_threshold=thr)
            elapsed += dt
            got = (s.innocent_drops, s.liars_survived, s.total_dropouts)
            if got != (0, 0, 10):
                failures.append(f"thr={thr} seed={seed} got {got}")
        slowest = max(slowest, elapsed)
    ok = not failures and slowest < 120
    detail = f"30 runs, innoc/surv/drop = 0/0/10 everywhere; slowest threshold {slowest:.1f}s (<120s)"
    record("1 IID liar elimination", ok, detail if ok else "; ".join(failures) or detail)
    assert ok, failures


def test_2_scale_stability():
    failures = []
    for n in (10, 50, 100):
        for seed in SEEDS:
            s, _ = summary(seed=seed, num_clients=n, reputation__reliability_threshold=0.25)
            if (s.innocent_drops, s.liars_survived) != (0, 0):
                failures.append(f"n={n} seed={seed} innoc={s.innocent_drops} surv={s.liars_survived}")
    record("2 scale stability", not failures, "n in {10,50,100} x 5 seeds: innoc=0, surv=0" if not failures else "; ".join(failures))
    assert not failures


def test_3_liar_fraction_robustness():
    failures, injected = [], {}
    for frac in (0.05, 0.1, 0.2, 0.3):
        for seed in SEEDS:
            s, _ = summary(seed=seed, liar_fraction=frac, reputation__reliability_threshold=0.25)
            injected[frac] = s.liars_injected
            if s.total_dropouts != s.liars_injected or s.innocent_drops:
                failures.append(f"frac={frac} seed={seed} drop={s.total_dropouts} liars={s.liars_injected} innoc={s.innocent_drops}")
    detail = "dropouts == injected liars " + ", ".join(f"{k}:{v}" for k, v in injected.items()) + "; innoc=0"
    record("3 liar-fraction robustness", not failures, detail if not failures else "; ".join(failures))
    assert not failures


def test_4_utility_separation():
    gaps = []
    for seed in SEEDS:
        s, _ = summary(seed=seed, reputation__reliability_threshold=0.25)
        gaps.append(s.mean_utility_reliable - s.mean_utility_unreliable)
    ok = all(g > 0 for g in gaps)
    record("4 utility separation", ok, "honest minus liar run-averaged utility per seed: " + ", ".join(f"{g:.4g}" for g in gaps))
    assert ok


@lru_cache(maxsize=None)
def _delta(kind: str, seed: int, baseline: bool) -> float:
    over = {"seed": seed, "attack.kind": kind, "attack.attacker_fraction": 0.1,
            "attack.mpa_scale": 2.0, "attack.nga_sigma": 1.0}
    if baseline:
        over.update({"aggregator": FEDAVG, "reputation_enabled": False})
    return attack_experiment(with_overrides(RunConfig(), over))


def test_5_robustness_ordering():
    parts, ok = [], True
    for kind in ("mpa", "nga"):
        pairs = [(_delta(kind, s, False), _delta(kind, s, True)) for s in SEEDS]
        wins = sum(m <= f for m, f in pairs)
        ok &= wins >= 4
        mean_m = np.mean([m for m, _ in pairs])
        mean_f = np.mean([f for _, f in pairs])
        parts.append(f"{kind.upper()} MURIM<=FedAvg on {wins}/5 seeds (mean dAcc {mean_m:.4f} vs {mean_f:.4f})")
    record("5 robustness ordering", ok, "; ".join(parts))
    assert ok, parts


# --------------------------------------------------------------------------
# unit-level criteria


def _dense_leverage(g, lam):
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    inv = np.linalg.inv(u.T @ u + lam * np.eye(u.shape[1]))
    return np.einsum("ij,jk,ik->i", u, inv, u)


def test_6_sle_numerics():
    rng = np.random.default_rng(20240601)
    lams = (0.01, 0.1, 1.0, 10.0)
    worst_lev = worst_simplex = 0.0
    for i in range(50):
        n, d = rng.integers(1, 13, size=2)
        g = rng.standard_normal((n, d)) * rng.uniform(0.1, 10, size=(n, 1))
        lam = lams[i % 4]
        worst_lev = max(worst_lev, np.max(np.abs(leverage_scores(g, SleParams(lam)) - _dense_leverage(g, lam))))
        w = sle_weights(g, SleParams(lam)).weights
        worst_simplex = max(worst_simplex, abs(w.sum() - 1), -w.min())
    amplified = []
    for n in (3, 5, 10):
        g = np.zeros((n, n))
        g[: n - 1, 0] = 1.0
        g[n - 1, 1] = 1.0
        w = sle_weights(g, SleParams(1.0)).weights
        amplified.append(bool(w[-1] > 1 / n))
    ok = worst_lev <= 1e-8 and worst_simplex <= 1e-9 and all(amplified)
    record("6 SLE numerics", ok, f"max leverage err {worst_lev:.2e} (<=1e-8), simplex err {worst_simplex:.2e} (<=1e-9), amplification n=3,5,10: {amplified}")
    assert ok


def test_7_reputation_units():
    rng = np.random.default_rng(7)
    simplex_err, expect_exact = 0.0, True
    inds = list(Indicator)
    for _ in range(200):
        op = Opinion()
        for _ in range(30):
            op = update_opinion(op, inds[rng.integers(3)])
            simplex_err = max(simplex_err, abs(op.belief + op.disbelief + op.uncertainty - 1))
            expect_exact &= expectation(op) == op.belief + 0.5 * op.uncertainty
    inv_err = 0.0
    for _ in range(1000):
        p = ResourceProfile(
            rho=float(rng.uniform(1e3, 1e7)), lambda_overhead=float(rng.uniform(0, 0.1)),
            r_true=float(rng.uniform(1e5, 1e6)), r_reported=float(rng.uniform(1e5, 3e6)),
        )
        inv_err = max(inv_err, abs(infer_resources(expected_latency(p), p) / p.r_reported - 1))
    iqr_ok = sum(
        classify_privacy_round(scores, BandParams()) == [LABEL[c] for c in labels] for scores, labels in IQR_FIXTURES
    )
    ok = simplex_err <= 1e-9 and expect_exact and inv_err <= 1e-9 and iqr_ok == 20
    record("7 reputation units", ok, f"simplex err {simplex_err:.1e}, b+0.5u exact {expect_exact}, inversion rel err {inv_err:.1e}, IQR fixtures {iqr_ok}/20")
    assert ok


def test_8_incentive_properties():
    rng = np.random.default_rng(8)
    p = IncentiveParams()
    n = 10_000
    c, lat, rel = rng.uniform(-5, 5, n), rng.uniform(0.01, 20, n), rng.uniform(0, 1, n)
    base = incentive(c, lat, rel, p)
    up_c = np.all(incentive(c + rng.uniform(1e-3, 1, n), lat, rel, p) > base)
    down_l = np.all(incentive(c, lat * rng.uniform(1.01, 4, n), rel, p) < base)
    rel2 = np.minimum(rel + rng.uniform(1e-3, 0.3, n), 1.0)
    mask = rel2 > rel
    up_p = np.all(incentive(c, lat, rel2, p)[mask] > base[mask])
    mid = IncentiveParams(w_contribution=0.0, w_latency=0.0)
    midpoint = bool(incentive(0.0, 1.0, mid.r0, mid) == mid.w_reliability * mid.r0**mid.zeta * 0.5)
    ok = bool(up_c and down_l and up_p and midpoint)
    record("8 incentive properties", ok, f"10^4 triples: up in C {up_c}, down in L {down_l}, up in P {up_p}; midpoint exact {midpoint}")
    assert ok


def test_9_dp_statistics():
    params = PrivacyParams(epsilon=3.0)
    sigma = gaussian_noise_sigma(params)
    noise = privatize(np.zeros(100_000), params, seed=99)
    rel = abs(noise.std() / sigma - 1)
    rng = np.random.default_rng(9)
    worst = 0.0
    for scale in (1e-3, 1.0, 1e3):
        vecs = rng.standard_normal((100_000 // 3 + 1, 16)) * scale
        norms = np.linalg.norm(np.array([clip(v, 1.0) for v in vecs]), axis=1)
        worst = max(worst, float(norms.max()))
    ok = rel <= 0.02 and worst <= 1.0
    record("9 DP statistics", ok, f"std rel err {rel:.4f} (<=0.02), max clipped norm {worst:.17g} (<=1.0) over 10^5 vectors")
    assert ok


def test_10_determinism(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli_main(["run", "--seed", "3", "--out", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    ok = outs[0] == outs[1] and len(outs[0]) == 3
    record("10 determinism", ok, f"{len(outs[0])} report files byte-identical across two full runs: {ok}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
