"""Acceptance criteria 1-9.

Criteria 1-5 need no training.  Criteria 6-9 share one desk-scale session
(10k training curves, 128^3 PPN, 64^3 KSN, 100-curve evaluation sets) whose
models are cached under the pytest cache directory; delete
``.pytest_cache/d/parnet-desk`` to retrain from scratch.
"""

import json
import time

import numpy as np
import pytest

from oracles import central_difference, de_boor_point
from parnet.bspline import (
    BSplineCurve,
    KnotVector,
    basis_all,
    check_schoenberg_whitney,
    evaluate,
    fit_constrained,
    squared_residual,
)
from parnet.classic import ClassicParametrizer
from parnet.datasets import (
    SynthesisConfig,
    build_eval_set,
    build_training_set,
    curve_rng,
    random_curve,
    random_interior_knots,
    sample_curve,
)
from parnet.evaluation import compare_parametrizations, compare_refinement, sweep_knots
from parnet.exceptions import SegmentationError
from parnet.geometry import hausdorff
from parnet.neural import (
    KnotSelector,
    PointParametrizer,
    approximation_layer,
    approximation_layer_backward,
    ksn_head,
    load_estimator,
    ppn_head,
    save_estimator,
)
from parnet.neural.models import ksn_dataset
from parnet.pipeline import (
    PipelineConfig,
    compute_kappa_threshold,
    initial_parametrization,
    refinement_path,
    segment,
)

DESK_PPN = dict(hidden_sizes=(128, 128, 128), learning_rate=1e-3, dropout=0.0,
                epochs=300, batch_size=256, random_state=0)
DESK_KSN = dict(hidden_sizes=(64, 64, 64), learning_rate=1e-3, dropout=0.0,
                epochs=100, batch_size=256, random_state=0)
TRAIN_CURVES = 10_000
EVAL_COUNT, EVAL_POINTS, EVAL_SEED = 100, 500, 11


# -- 1-5: property suites ------------------------------------------------------

def random_spline(rng):
    degree = int(rng.integers(1, 6))
    n_interior = int(rng.integers(0, 6))
    interior = np.sort(rng.uniform(0, 1, n_interior))
    if n_interior > 1 and rng.random() < 0.3:
        interior[1] = interior[0]  # a repeated interior knot now and then
    kv = KnotVector.clamped(interior, degree)
    return BSplineCurve(kv, rng.normal(size=(kv.n_basis, 2)))


def test_criterion_1_bspline_correctness(criterion):
    rng = np.random.default_rng(1)
    worst_oracle = worst_unity = 0.0
    support_ok = ends_ok = True
    for _ in range(1000):
        curve = random_spline(rng)
        kv, k = curve.knot_vector, curve.degree
        u = np.concatenate([rng.uniform(0, 1, 8), [0.0, 1.0]])
        got = evaluate(curve, u)
        want = np.array([de_boor_point(curve.knots, k, curve.control_points, x) for x in u])
        worst_oracle = max(worst_oracle, float(np.max(np.abs(got - want))))
        N = basis_all(kv, u)
        worst_unity = max(worst_unity, float(np.max(np.abs(N.sum(axis=1) - 1))))
        for row, x in zip(N, u):
            nz = np.flatnonzero(row)
            span = np.searchsorted(curve.knots, x, side="right") - 1
            span = min(span, curve.knots.size - k - 2)
            support_ok &= nz.size <= k + 1 and nz.min() >= span - k and nz.max() <= span
        ends_ok &= np.allclose(got[-2:], curve.control_points[[0, -1]], rtol=0, atol=1e-12)
    passed = worst_oracle <= 1e-10 and worst_unity <= 1e-12 and support_ok and ends_ok
    criterion(1, passed, f"10^4 de Boor pairs, max err {worst_oracle:.2e}; "
                         f"unity err {worst_unity:.2e}; support {support_ok}; ends {ends_ok}")
    assert passed


def test_criterion_2_least_squares_recovery(criterion):
    rng = np.random.default_rng(2)
    cfg = SynthesisConfig()
    worst_res = worst_h = 0.0
    perturb_ok = True
    for index in range(200):
        crng = curve_rng(2, 0, index)
        curve = random_curve(cfg, crng, random_interior_knots(crng))
        spans = curve.knot_vector.spans()
        mids = [(a + b) / 2 for a, b in spans]  # keeps every span occupied
        t = np.sort(np.concatenate([[0, 1], mids, rng.uniform(0, 1, 298 - len(mids))]))
        p = evaluate(curve, t)
        fitted = fit_constrained(p, t, curve.knot_vector)
        residual = np.sqrt(squared_residual(fitted, p, t))
        worst_res = max(worst_res, residual)
        # fitted vs generating curve, both sampled on one dense grid
        grid = np.linspace(0, 1, 3000)
        worst_h = max(worst_h, hausdorff(evaluate(fitted, grid), evaluate(curve, grid)))
        j = int(rng.integers(1, fitted.control_points.shape[0] - 1))
        ctrl = fitted.control_points.copy()
        ctrl[j] += rng.normal(size=2) * 1e-3
        perturb_ok &= squared_residual(BSplineCurve(fitted.knot_vector, ctrl), p, t) > \
            squared_residual(fitted, p, t)
    passed = worst_res < 1e-8 and worst_h < 1e-7 and perturb_ok
    criterion(2, passed, f"200 curves, max residual {worst_res:.2e}, "
                         f"max Hausdorff {worst_h:.2e}, perturbation {perturb_ok}")
    assert passed


def _weight_fd(est, X, rng, rtol=1e-3):
    est.n_features_in_ = X.shape[1]
    mlp = est._make_network(X.shape[1], np.random.default_rng(0))
    inputs = est._network_input(X)
    out, tape = mlp.forward(inputs)
    _, grad_out = est._loss_and_grad(out, X)
    grads, _ = mlp.backward(tape, grad_out)
    worst = 0.0
    for param, grad in zip(mlp.params, grads):
        scale = max(np.max(np.abs(grad)), 1e-8)
        for flat in rng.choice(param.size, max(1, param.size // 100), replace=False):
            idx = np.unravel_index(flat, param.shape)
            saved = param[idx]
            losses = []
            for value in (saved + 1e-5, saved - 1e-5):
                param[idx] = value
                losses.append(est._loss_and_grad(mlp.predict(inputs), X, need_grad=False)[0].mean())
            param[idx] = saved
            fd = (losses[0] - losses[1]) / 2e-5
            worst = max(worst, abs(grad[idx] - fd) / scale)
    return worst


def test_criterion_3_gradient_fidelity(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_t = worst_u = 0.0
    for k in range(50):
        interior = (float(rng.uniform(0.3, 0.7)),) if k % 2 else ()
        kv = KnotVector.clamped(interior)
        t = np.concatenate([[0], np.sort(rng.uniform(0, 1, 18)), [1]])
        p = BSplineCurve(kv, rng.normal(size=(kv.n_basis, 2)))(t) + rng.normal(0, 0.05, (20, 2))
        grad_t, grad_u = approximation_layer_backward(p, t, kv)
        # t_0 = 0 and t_l = 1 are fixed by the PPN head
        fd = central_difference(
            lambda inner: approximation_layer(p, np.r_[0.0, inner, 1.0], kv)[1], t[1:-1])
        worst_t = max(worst_t, np.max(np.abs(grad_t[1:-1] - fd)) / np.max(np.abs(fd)))
        if interior:
            fd_u = central_difference(
                lambda u: approximation_layer(p, t, KnotVector.clamped(u))[1],
                np.array(interior))[0]
            worst_u = max(worst_u, abs(grad_u - fd_u) / max(abs(fd_u), 1e-9))
    ds = build_training_set(SynthesisConfig(seed=3), 10)
    ppn = PointParametrizer(**{**DESK_PPN, "dropout": 0.0})
    worst_ppn = _weight_fd(ppn, ds.X[:8], rng)
    t_rows = ClassicParametrizer("chordal").fit(ds.X).transform(ds.X[:8])
    ksn = KnotSelector(**{**DESK_KSN, "dropout": 0.0})
    worst_ksn = _weight_fd(ksn, np.concatenate([ds.X[:8], t_rows], axis=1), rng)
    elapsed = time.perf_counter() - start
    passed = (worst_t <= 1e-4 and worst_u <= 1e-4 and worst_ppn <= 1e-3 and worst_ksn <= 1e-3
              and elapsed < 120)
    criterion(3, passed, f"layer t {worst_t:.1e}, u {worst_u:.1e}; nets ppn {worst_ppn:.1e}, "
                         f"ksn {worst_ksn:.1e}; {elapsed:.0f}s")
    assert passed


def test_criterion_4_pipeline_invariants(criterion):
    rng = np.random.default_rng(4)
    l = 30
    ppn = ClassicParametrizer("centripetal").fit(np.zeros((1, 2 * l)))
    kappa = 4.0
    checked = skipped = 0
    problems = []
    for index in range(500):
        crng = curve_rng(4, 1, index)
        curve = random_curve(SynthesisConfig(), crng, random_interior_knots(crng))
        m = int(rng.integers(20, 400))
        mode = ("uniform-arclength", "random-parameter")[index % 2]
        p = sample_curve(curve, m, mode, curve_rng(4, 1, index, 1))
        try:
            ranges = segment(p, kappa)
        except SegmentationError:
            skipped += 1
            continue
        covered = ranges[0][0] == 0 and ranges[-1][1] == m - 1 and all(
            b0 == a1 for (_, b0), (a1, _) in zip(ranges, ranges[1:]))
        _, t, kv = initial_parametrization(p, ppn, kappa, l)
        monotone = t[0] == 0 and t[-1] == 1 and np.all(np.diff(t) > 0)
        sw = True
        inserted_ok = True
        previous = None
        for kv_i, _, _, info in refinement_path(p, t, kv, _RandomSelector(rng), kv.interior.size + 4, l):
            sw &= check_schoenberg_whitney(t, kv_i)
            if previous is not None:
                added = np.setdiff1d(kv_i.knots, previous.knots)
                inserted_ok &= (kv_i.knots.size == previous.knots.size + 1
                                and info["inserted"] in t
                                and np.count_nonzero(kv_i.knots == info["inserted"]) == 1
                                and added.tolist() == [info["inserted"]])
            previous = kv_i
        if not (covered and monotone and sw and inserted_ok):
            problems.append(index)
        checked += 1
    passed = not problems and skipped <= 25
    criterion(4, passed, f"{checked} inputs checked, {skipped} unsplittable, "
                         f"violations {problems[:5]}")
    assert passed


class _RandomSelector:
    def __init__(self, rng):
        self.rng = rng

    def predict_knot(self, points, t):
        return ksn_head(self.rng.uniform(-0.2, 1.2))


def test_criterion_5_head_contracts(criterion):
    rng = np.random.default_rng(5)
    raw = rng.exponential(size=(10_000, 99)) + 1e-12
    scale = rng.uniform(1e-3, 1e3, size=(10_000, 1))
    t = ppn_head(raw)
    monotone = bool(np.all(np.diff(t, axis=1) > 0) and np.all(t[:, 0] == 0)
                    and np.all(t[:, -1] == 1))
    invariant = float(np.max(np.abs(ppn_head(raw * scale) - t)))
    draws = rng.uniform(-3, 4, 1_000_000)
    u = ksn_head(draws)
    in_range = bool(u.min() >= 1e-5 and u.max() <= 1 - 1e-5)
    table = (ksn_head(-0.3) == 1e-5 and ksn_head(1.7) == 1 - 1e-5 and ksn_head(0.42) == 0.42)
    passthrough = bool(np.all(u[(draws > 1e-5) & (draws < 1 - 1e-5)]
                              == draws[(draws > 1e-5) & (draws < 1 - 1e-5)]))
    passed = monotone and invariant <= 1e-12 and in_range and table and passthrough
    criterion(5, passed, f"ppn monotone {monotone}, scale err {invariant:.1e}; "
                         f"ksn range {in_range}, table {table}")
    assert passed


# -- 6-9: desk-scale reproduction -----------------------------------------------

@pytest.fixture(scope="session")
def desk(request):
    cache = request.config.cache.mkdir("parnet-desk")
    key = json.dumps({"ppn": DESK_PPN, "ksn": DESK_KSN, "n": TRAIN_CURVES}, sort_keys=True,
                     default=list)
    ppn_path, ksn_path, meta_path = cache / "ppn.bin", cache / "ksn.bin", cache / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    if meta.get("key") != key or not (ppn_path.exists() and ksn_path.exists()):
        start = time.perf_counter()
        ds = build_training_set(SynthesisConfig(seed=0), TRAIN_CURVES)
        ppn = PointParametrizer(**DESK_PPN).fit(ds.train.X, X_test=ds.test.X)
        rows = ksn_dataset(ds, ppn)
        ksn = KnotSelector(**DESK_KSN).fit(rows[~ds.is_test], X_test=rows[ds.is_test])
        save_estimator(ppn_path, ppn)
        save_estimator(ksn_path, ksn)
        meta = {"key": key, "kappa_threshold": compute_kappa_threshold(ds.points),
                "train_seconds": time.perf_counter() - start,
                "ppn_history": [ppn.history_[0], ppn.history_[-1]],
                "ksn_history": [ksn.history_[0], ksn.history_[-1]]}
        meta_path.write_text(json.dumps(meta))
    return {"ppn": load_estimator(ppn_path, "ppn"), "ksn": load_estimator(ksn_path, "ksn"),
            **meta}


@pytest.fixture(scope="session")
def eval_sets():
    return {k: build_eval_set(k, EVAL_COUNT, EVAL_POINTS, seed=EVAL_SEED) for k in (1, 2, 3)}


@pytest.mark.slow
def test_criterion_6_table1_direction(desk, eval_sets, criterion):
    start = time.perf_counter()
    means = compare_parametrizations(eval_sets[1], desk["ppn"]).means
    elapsed = time.perf_counter() - start
    ratio = means["ppn"] / means["centripetal"]
    ordering = all(means["ppn"] < means[m] for m in ("uniform", "chordal", "centripetal"))
    passed = ratio <= 0.5 and ordering and desk["train_seconds"] <= 1800 and elapsed <= 300
    criterion(6, passed, "set 1 " + ", ".join(f"{m} {v:.4f}" for m, v in means.items())
              + f"; ratio {ratio:.2f}; train {desk['train_seconds']:.0f}s, eval {elapsed:.0f}s")
    assert passed


@pytest.mark.slow
def test_criterion_7_uneven_sampling(desk, eval_sets, criterion):
    means = compare_parametrizations(eval_sets[2], desk["ppn"]).means
    passed = means["ppn"] < means["centripetal"]
    criterion(7, passed, "set 2 " + ", ".join(f"{m} {v:.4f}" for m, v in means.items()))
    assert passed


@pytest.mark.slow
def test_criterion_8_knot_sweep(desk, eval_sets, criterion):
    report = sweep_knots(eval_sets[3], desk["ppn"], desk["ksn"], desk["kappa_threshold"], [7, 12])
    rows = report.table()
    passed = all(parnet < nktp for _, parnet, nktp in rows)
    criterion(8, passed, "; ".join(f"{k} knots parnet {a:.4f} nktp {b:.4f}" for k, a, b in rows))
    assert passed


@pytest.mark.slow
def test_criterion_9_refinement(desk, eval_sets, criterion):
    means = compare_refinement(eval_sets[3], desk["ppn"], desk["ksn"],
                               desk["kappa_threshold"], steps=5).means
    passed = means["ksn"] < means["midpoint"]
    criterion(9, passed, f"after 5 insertions ksn {means['ksn']:.4f}, "
                         f"midpoint {means['midpoint']:.4f}")
    assert passed
