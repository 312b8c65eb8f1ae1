import math

import numpy as np
import pytest

from telegraph.core_model import ObservableSpec, SimVariant
from telegraph.functionals import exact_exp_avg_integral, grid_functional
from telegraph.mc_engine import (
    ExperimentConfig,
    MomentAccumulator,
    bm_exp_avg_block,
    estimate_blocks,
    mc_estimate,
    ols_loglog,
    resolve_workers,
    run_experiment,
    telegraph_exp_avg_block,
    telegraph_position_block,
    validate_mgf,
)
from telegraph.path_samplers import sample_bm_grid, sample_sym_path
from telegraph.rng import RngStream


def test_constant_task_has_zero_error():
    est = mc_estimate(lambda g: 2.5, 3000, seed=7)
    assert est.mean == 2.5 and est.std_error == 0.0 and est.n == 3000


def test_gaussian_task():
    est = mc_estimate(lambda g: g.standard_normal(), 20_000, seed=11)
    assert abs(est.mean) < 4 * est.std_error
    assert est.std_error == pytest.approx(1 / math.sqrt(20_000), rel=0.05)


def test_mc_estimate_rejects_small_n():
    with pytest.raises(ValueError):
        mc_estimate(lambda g: 0.0, 0, seed=1)
    with pytest.raises(ValueError):
        estimate_blocks(lambda g, m: np.zeros(m), 1, RngStream(1))


def test_non_finite_names_replicate():
    with pytest.raises(FloatingPointError, match="replicate 5"):
        mc_estimate(lambda g, c=iter(range(100)): math.nan if next(c) == 5 else 1.0, 100, seed=1, workers=1)

    def block(gen, m):
        out = np.ones(m)
        if m < 32:
            out[3] = np.inf
        return out

    with pytest.raises(FloatingPointError, match="replicate 99"):
        estimate_blocks(block, 100, RngStream(1), block_size=32, workers=1)


def test_accumulator_matches_two_pass():
    rng = np.random.default_rng(5)
    x = rng.lognormal(1.0, 1.5, size=50_001)
    acc = MomentAccumulator()
    acc.push_many(x[:1000])
    for v in x[1000:1100]:
        acc.push(float(v))
    acc.push_many(x[1100:])
    assert acc.n == x.size
    assert acc.mean == pytest.approx(x.mean(), rel=1e-12)
    assert acc.variance == pytest.approx(x.var(ddof=1), rel=1e-12)


def test_accumulator_merge_is_order_insensitive():
    rng = np.random.default_rng(6)
    parts = [rng.normal(i, 1 + i, size=100 + 37 * i) for i in range(6)]
    accs = []
    for p in parts:
        a = MomentAccumulator()
        a.push_many(p)
        accs.append(a)
    fwd, rev = MomentAccumulator(), MomentAccumulator()
    for a in accs:
        fwd.merge(a)
    for a in reversed(accs):
        rev.merge(a)
    allx = np.concatenate(parts)
    for tot in (fwd, rev):
        assert tot.mean == pytest.approx(allx.mean(), rel=1e-12)
        assert tot.variance == pytest.approx(allx.var(ddof=1), rel=1e-12)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("TELEGRAPH_THREADS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    assert resolve_workers(0) == 1


def test_worker_count_does_not_change_results():
    def block(gen, m):
        return telegraph_exp_avg_block(gen, m, 5.0, 1.0, False, False, 1.2, -0.1)

    one = estimate_blocks(block, 10_000, RngStream(9), block_size=1000, workers=1)
    four = estimate_blocks(block, 10_000, RngStream(9), block_size=1000, workers=4)
    assert one == four
    t1 = mc_estimate(lambda g: g.random(), 5000, seed=2, workers=1)
    t3 = mc_estimate(lambda g: g.random(), 5000, seed=2, workers=3)
    assert t1 == t3


def test_bm_block_matches_grid_path_api():
    spec = ObservableSpec(1.3, -0.2)
    gen_a = RngStream(4, 2).generator()
    gen_b = RngStream(4, 2).generator()
    block = bm_exp_avg_block(gen_a, 5, 100, 1.0, 0.4, 0.1, spec.a, spec.b)
    for k in range(5):
        path = sample_bm_grid(0.4, 0.1, 1.0, 100, gen_b)
        assert block[k] == pytest.approx(grid_functional(path, spec), rel=1e-12)


@pytest.mark.parametrize("variant", list(SimVariant))
def test_telegraph_blocks_match_path_api(variant):
    collated = variant is SimVariant.COLLATED
    gen_a, gen_b, gen_c = (RngStream(8, 1).generator() for _ in range(3))
    avg = telegraph_exp_avg_block(gen_a, 20, 7.0, 1.0, collated, False, 0.9 * 1.5, 0.2)
    pos = telegraph_position_block(gen_c, 20, 7.0, 1.0, collated, False, 1.5)
    for k in range(20):
        path = sample_sym_path(7.0, 1.5, 1.0, variant, gen_b)
        assert avg[k] == pytest.approx(exact_exp_avg_integral(path, 0.9, 0.2), rel=1e-14)
        assert pos[k] == pytest.approx(path.position(1.0), abs=1e-14)


def test_ols_examples():
    lams = [1.0, 2.0, 4.0, 8.0]
    fit = ols_loglog([(x, 1 / x) for x in lams])
    assert fit.slope == pytest.approx(-1.0, abs=1e-14)
    assert fit.intercept == pytest.approx(0.0, abs=1e-14)
    assert fit.r_squared == pytest.approx(1.0)
    flat = ols_loglog([(x, -0.3) for x in lams])
    assert flat.slope == pytest.approx(0.0, abs=1e-14)
    assert flat.n_negative == 4
    fit = ols_loglog([(x, 5 * x**-0.5) for x in lams])
    assert fit.slope == pytest.approx(-0.5, abs=1e-14)
    assert math.exp(fit.intercept) == pytest.approx(5.0, rel=1e-13)


def test_ols_rejects_bad_input():
    for pts in ([(1.0, 1.0)], [(1.0, 0.0), (2.0, 1.0)], [(1.0, 1.0), (1.0, 2.0)], [(-1.0, 1.0), (2.0, 1.0)]):
        with pytest.raises(ValueError):
            ols_loglog(pts)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n_samples=0)
    with pytest.raises(ValueError):
        ExperimentConfig(lambda_grid=())
    with pytest.raises(ValueError):
        ExperimentConfig(sigmas=(0.0,))
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig(share_brownian=True, standard_brownian=True, n_samples=10))


def test_full_grid_has_360_cells():
    cells = ExperimentConfig().cells()
    assert len(cells) == 360
    assert len({(K, s, lam) for _, K, s, lam in cells}) == 360
    assert [c[0] for c in cells] == list(range(360))


def test_brownian_diffusivity():
    cfg = ExperimentConfig()
    assert cfg.brownian_sigma2(4.0) == 0.25
    assert ExperimentConfig(standard_brownian=True).brownian_sigma2(4.0) == 1.0


def _tiny(**kw):
    base = dict(strikes=(1.0,), sigmas=(0.3,), lambda_grid=(2.5,), n_samples=2000, n_grid_steps=50, block_size=512)
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_experiment_is_deterministic_and_worker_independent():
    a = run_experiment(_tiny(workers=1))
    b = run_experiment(_tiny(workers=3))
    assert a == b
    row = a[0]
    assert row.error == row.est_brownian - row.est_telegraph
    assert row.variant == "alternating" and row.seed == 1 and row.n == 2000


def test_shared_brownian_cache_reused():
    cache = {}
    cfg = _tiny(lambda_grid=(2.5, 5.0), strikes=(0.9, 1.0), share_brownian=True)
    rows = run_experiment(cfg, brownian_cache=cache)
    assert len(cache) == 1
    by_k = {}
    for r in rows:
        by_k.setdefault(r.K, set()).add(r.est_brownian)
    assert all(len(v) == 1 for v in by_k.values())
    col = run_experiment(ExperimentConfig(**{**cfg.__dict__, "variant": SimVariant.COLLATED}), brownian_cache=cache)
    assert len(cache) == 1
    assert [r.est_brownian for r in col] == [r.est_brownian for r in rows]


def test_on_row_callback():
    seen = []
    rows = run_experiment(_tiny(lambda_grid=(2.5, 5.0)), on_row=seen.append)
    assert seen == rows


def test_smoke_cell_within_bound():
    row = run_experiment(_tiny(n_samples=10**5, n_grid_steps=200, block_size=1 << 14))[0]
    assert 0 < row.est_telegraph < 1 and 0 < row.est_brownian < 1
    assert abs(row.error) <= row.bound_per_C
    assert row.se_telegraph < 1e-3


def test_validate_mgf_trivial_cases():
    checks = validate_mgf(3.0, 0.0, [0.5, 1.0], n=10**4, seed=1)
    assert all(c.z_score == 0 and c.empirical == 1.0 == c.analytic for c in checks)
    with pytest.raises(ValueError):
        validate_mgf(3.0, 1.0, [1.0], n=100, seed=1)


def test_validate_mgf_small_run():
    checks = validate_mgf(2.0, 0.5, [0.5, 1.0], n=4 * 10**4, seed=3)
    for c in checks:
        assert abs(c.z_score) < 5
        assert c.std_error > 0
