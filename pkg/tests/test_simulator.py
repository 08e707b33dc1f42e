import numpy as np
import pytest

from conftest import tiny
from murim.model import init_params
from murim.simulator import (
    ATTACKER,
    HONEST,
    PRIVACY_LIAR,
    RESOURCE_LIAR,
    attack_experiment,
    build_clients,
    client_step,
    load_data,
    run,
    sweep,
)


def test_zero_rounds():
    res = run(tiny(rounds=0))
    assert res.records == []
    assert not res.model.any()
    assert len(res.summary.test_acc) == 1
    assert res.summary.rounds_completed == 0


def test_deterministic():
    a, b = run(tiny()), run(tiny())
    assert a.model.tobytes() == b.model.tobytes()
    assert a.records == b.records
    assert a.summary == b.summary


def test_seed_changes_run():
    assert run(tiny(seed=1)).model.tobytes() != run(tiny(seed=2)).model.tobytes()


def test_population_roles():
    cfg = tiny(num_clients=40, liar_fraction=0.25, attack__kind="mpa", attack__attacker_fraction=0.1)
    train, _, _ = load_data(cfg)
    clients = build_clients(cfg, train)
    roles = [c.role for c in clients]
    assert roles.count(RESOURCE_LIAR) == 5 and roles.count(PRIVACY_LIAR) == 5
    assert roles.count(ATTACKER) == 4 and roles.count(HONEST) == 26
    for c in clients:
        r = c.resources
        if c.role == RESOURCE_LIAR:
            assert r.r_reported == pytest.approx(3 * r.r_true)
        else:
            assert r.r_reported == r.r_true
        if c.role == PRIVACY_LIAR:
            assert 2.5 <= c.epsilon <= 5.0
        else:
            assert 10.0 <= c.epsilon <= 12.0


def test_attack_does_not_change_other_draws():
    clean, attacked = tiny(), tiny(attack__kind="nga")
    train, _, _ = load_data(clean)
    a, b = build_clients(clean, train), build_clients(attacked, train)
    for x, y in zip(a, b):
        assert x.resources == y.resources and x.epsilon == y.epsilon


def test_records_and_conservation():
    cfg = tiny(num_clients=20, rounds=8, liar_fraction=0.2)
    res = run(cfg)
    dropped_so_far = set()
    for t in range(cfg.rounds):
        recs = [r for r in res.records if r.round == t]
        ids = {r.client_id for r in recs}
        # one record per active-or-just-dropped client
        assert ids == set(range(20)) - dropped_so_far
        dropped_so_far |= {r.client_id for r in recs if r.dropped}
        for r in recs:
            assert r.p_reliability == pytest.approx(r.p_resources * r.p_privacy, abs=1e-15)
            if r.dropped:
                assert r.incentive == 0.0
    s = res.summary
    assert s.total_dropouts == len(dropped_so_far)
    assert s.innocent_drops + (s.liars_injected - s.liars_survived) + s.attacker_drops == s.total_dropouts


def test_no_liars_no_drops_zero_jitter():
    cfg = tiny(num_clients=30, rounds=10, liar_fraction=0.0, resources__jitter_cv=0.0)
    res = run(cfg)
    assert res.summary.innocent_drops == 0
    assert all(r.resource_indicator == "belief" for r in res.records)


def test_reputation_disabled_never_drops():
    res = run(tiny(reputation_enabled=False, rounds=6, liar_fraction=0.3))
    assert res.summary.total_dropouts == 0
    assert res.summary.liars_survived == res.summary.liars_injected


def test_all_dropped_terminates_early():
    res = run(tiny(reputation__reliability_threshold=1.0, reputation__grace_rounds=0))
    assert res.summary.terminated_early
    assert res.summary.rounds_completed == 1
    assert res.summary.total_dropouts == 10


def test_fedavg_matches_direct_mean():
    cfg = tiny(aggregator="fedavg", reputation_enabled=False, data__num_classes=5)
    res = run(cfg)
    train, _, _ = load_data(cfg)
    clients = build_clients(cfg, train)
    assert len({len(c.shard) for c in clients}) == 1
    model = init_params(train.num_features, train.num_classes)
    for t in range(cfg.rounds):
        ups = [client_step(c, model, cfg, t).update for c in clients]
        model = model + sum(ups) / len(ups)
    np.testing.assert_allclose(res.model, model, rtol=0, atol=1e-12)


def test_attack_none_delta_zero():
    assert attack_experiment(tiny()) == 0.0


def test_tiny_nga_negligible():
    delta = attack_experiment(tiny(attack__kind="nga", attack__nga_sigma=1e-6))
    assert abs(delta) <= 0.02


def test_sweep_singleton_equals_run():
    (entry,) = sweep([tiny()])
    assert entry.error is None
    assert entry.result.summary == run(tiny()).summary


def test_sweep_continues_after_error():
    bad = tiny(data__source="csv", data__csv_path="/nonexistent.csv", data__label_column="y")
    entries = sweep([bad, tiny()])
    assert entries[0].error is not None and entries[0].result is None
    assert entries[1].error is None


def test_parallel_sweep_matches_serial():
    cfgs = [tiny(seed=s) for s in range(3)]
    serial = sweep(cfgs, jobs=1)
    parallel = sweep(cfgs, jobs=2)
    for a, b in zip(serial, parallel):
        assert a.result.model.tobytes() == b.result.model.tobytes()


def test_sweep_needs_configs():
    with pytest.raises(ValueError):
        sweep([])


def test_csv_source(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["a,b,color,y"]
    for i in range(400):
        y = i % 2
        lines.append(f"{rng.normal(y * 6):.4f},{rng.normal():.4f},{'red' if y else 'blue'},{y}")
    p = tmp_path / "d.csv"
    p.write_text("\n".join(lines) + "\n")
    cfg = tiny(data__source="csv", data__csv_path=str(p), data__label_column="y",
               data__numeric=["a", "b"], data__categorical={"color": ["red", "blue"]})
    res = run(cfg)
    assert res.model.shape == ((4 + 1) * 2,)
    assert res.summary.final_test > 0.7


def test_utility_run_average():
    res = run(tiny(rounds=5))
    honest = [c.client_id for c in res.clients if c.role == HONEST]
    per = [sum(r.utility for r in res.records if r.client_id == i) / 5 for i in honest]
    assert res.summary.mean_utility_reliable == pytest.approx(np.mean(per))
