"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""
import math
import time

import numpy as np
import pytest

from fruitgrade import features, imgcore, segment, select, synth
from fruitgrade.cli import run_cli
from fruitgrade.learn import Dataset, SelectionConfig, cross_validate, kfold_indices, split_dataset
from fruitgrade.learn.mlp import init_mlp, levenberg_marquardt, mlp_fit

from .conftest import ACCEPTANCE_RESULTS, disk_mask, ellipse_mask
from .test_features import moments_oracle
from .test_imgcore import brute_otsu


def verdict(name, ok, detail):
    ok = bool(ok)
    ACCEPTANCE_RESULTS.append((name, ok, detail))
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_otsu_oracle():
    rng = np.random.default_rng(2024)
    images = [rng.integers(0, 256, (32, 32), dtype=np.uint8) for _ in range(200)]
    start = time.perf_counter()
    ours = [imgcore.otsu_threshold(img) for img in images]
    elapsed = time.perf_counter() - start
    agree = sum(a == brute_otsu(img) for a, img in zip(ours, images))
    verdict("Otsu oracle", agree == 200 and elapsed < 5, f"{agree}/200 match, {elapsed:.3f} s")


def test_moment_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(2, 2000))
        x = rng.choice([rng.uniform(0, 255, n), rng.normal(100, 30, n), rng.exponential(20, n)])
        for a, b in zip(features.channel_stats(x), moments_oracle(x)):
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300) if b != 0 else abs(a))
    verdict("Moment oracle", worst <= 1e-9, f"max relative error {worst:.2e}")


def test_glcm_invariants():
    rng = np.random.default_rng(11)
    sums = []
    for _ in range(50):
        gray = rng.integers(0, 256, (24, 24), dtype=np.uint8)
        mask = rng.random((24, 24)) < 0.7
        sums.append(abs(features.compute_glcm(gray, mask).probabilities.sum() - 1))
    const = features.texture_features(features.compute_glcm(np.full((9, 9), 140, np.uint8), np.ones((9, 9), bool)))
    yy, xx = np.mgrid[0:10, 0:10]
    board = np.where((xx + yy) % 2 == 0, 0, 255).astype(np.uint8)
    contrast, _, energy, homog = features.texture_features(
        features.compute_glcm(board, np.ones((10, 10), bool), 8, ((1, 0),))
    )
    ok = (
        max(sums) <= 1e-12
        and (const[0], const[2], const[3]) == (0.0, 1.0, 1.0)
        and (contrast, homog, energy) == (49.0, 0.125, 0.5)
    )
    verdict(
        "GLCM",
        ok,
        f"max |sum-1| {max(sums):.1e}; constant {const[[0, 2, 3]].tolist()}; "
        f"checkerboard contrast {contrast}, homogeneity {homog}, energy {energy}",
    )


def test_shape_oracles():
    disk = dict(zip(features.SHAPE_NAMES, features.shape_features(features.region_geometry(disk_mask(50)), 1.0)))
    area_err = abs(disk["area_mm2"] - math.pi * 2500) / (math.pi * 2500)
    ell = dict(zip(features.SHAPE_NAMES, features.shape_features(features.region_geometry(ellipse_mask(80, 40)), 1.0)))
    ok = area_err < 0.02 and disk["eccentricity"] < 0.1 and disk["solidity"] > 0.98
    ok = ok and abs(ell["eccentricity"] - 0.866) <= 0.02
    verdict(
        "Shape oracles",
        ok,
        f"disk area error {area_err:.4f}, ecc {disk['eccentricity']:.4f}, solidity {disk['solidity']:.4f}; "
        f"ellipse ecc {ell['eccentricity']:.4f}",
    )


def test_pca_properties():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(400, 12)) @ rng.normal(size=(12, 12)) + rng.normal(size=12)
    full = select.pca_fit(x, 1.0)
    gram = np.max(np.abs(full.components @ full.components.T - np.eye(full.n_components)))
    z = select.pca_project(full, x)
    cov = np.cov(z, rowvar=False)
    off = np.max(np.abs(cov - np.diag(np.diag(cov))))
    recon = np.max(np.abs(select.pca_reconstruct(full, z) - x))
    ok = full.n_components == 12 and gram < 1e-8 and off < 1e-8 and recon < 1e-8
    verdict("PCA", ok, f"Gram dev {gram:.1e}, cov off-diagonal {off:.1e}, reconstruction {recon:.1e}")


def test_cfs_duplicates():
    good = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 3, 500)
        info = y + rng.normal(0, 0.5, 500)
        x = np.column_stack([info, info, rng.normal(size=(500, 57))])
        chosen = set(select.cfs_search(x, y).indices)
        good += int(bool(chosen & {0, 1}) and not {0, 1} <= chosen)
    verdict("CFS", good >= 95, f"{good}/100 runs select the informative feature without its duplicate")


def test_mlp_checks():
    rng = np.random.default_rng(0)
    net = init_mlp(4, 6, 3, seed=2)
    x = rng.normal(size=(7, 4))
    w = net.flat()
    J = net.jacobian(x)
    fd = np.empty_like(J)
    for p in range(w.size):
        up, dn = w.copy(), w.copy()
        up[p] += 1e-6
        dn[p] -= 1e-6
        fd[:, p] = (net.with_flat(up).predict_proba(x) - net.with_flat(dn).predict_proba(x)).ravel() / 2e-6
    grad_err = np.linalg.norm(J - fd) / np.linalg.norm(fd)

    A = rng.normal(size=(30, 5))
    target = A @ rng.normal(size=5)
    w_ls, accepted = levenberg_marquardt(lambda v: A @ v - target, lambda v: A, np.zeros(5), lam0=0.0)
    exact = np.allclose(A @ w_ls, target, atol=1e-10) and accepted == 1

    xor_x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    xor_y = np.array([0, 1, 1, 0])
    wins = sum(
        int((mlp_fit(xor_x, xor_y, hidden=4, seed=s, max_iter=200).predict(xor_x) == xor_y).all()) for s in range(10)
    )
    verdict(
        "MLP",
        grad_err < 1e-6 and exact and wins >= 9,
        f"Jacobian rel error {grad_err:.1e}; LM one-step exact {exact}; XOR {wins}/10 seeds",
    )


def test_protocol():
    sizes = {}
    for n in (100, 101, 150):
        plan = split_dataset(np.arange(n) % 3, seed=1)
        sizes[n] = (len(plan.train), len(plan.validation), len(plan.test))
    expected = {n: (int(0.7 * n + 1e-9), int(0.15 * n + 1e-9), n - int(0.7 * n + 1e-9) - int(0.15 * n + 1e-9))
                for n in sizes}  # fmt: skip
    folds_ok = True
    for n in (100, 103, 150, 57):
        folds = kfold_indices(n, 10, seed=n)
        flat = np.concatenate(folds)
        lens = [len(f) for f in folds]
        folds_ok &= sorted(flat.tolist()) == list(range(n)) and max(lens) - min(lens) <= 1
    verdict("Protocol", sizes == expected and folds_ok, f"split sizes {sizes}; folds disjoint/complete/balanced {folds_ok}")


@pytest.mark.slow
def test_end_to_end_synthetic(tmp_path):
    start = time.perf_counter()
    spec = synth.default_spec(samples_per_grade=50, seed=0)
    images = tmp_path / "corpus"
    assert run_cli(["synth", "--out", str(images), "--samples-per-grade", "50", "--seed", "0"]) == 0
    csv_path = tmp_path / "features.csv"
    assert run_cli(["extract", "--images", str(images), "--labels", str(images / "labels.csv"), "--out", str(csv_path)]) == 0
    x, labels, names = features.read_feature_csv(csv_path)
    data = Dataset.from_strings(x, labels, names)
    folds = kfold_indices(len(data), 10, seed=0)
    after = cross_validate(data, "tree-medium", SelectionConfig("cfs"), folds=folds)
    before = cross_validate(data, "tree-medium", SelectionConfig("none"), folds=folds)
    elapsed = time.perf_counter() - start
    ok = len(data) == 150 and after.accuracy >= 0.95 and after.accuracy >= before.accuracy - 0.02 and elapsed < 120
    verdict(
        "End-to-end synthetic",
        ok,
        f"{len(data)} samples of {len(spec.grades)} grades; 10-fold CV tree-medium after CFS {after.accuracy:.3f}, "
        f"before {before.accuracy:.3f}; {elapsed:.1f} s",
    )


def test_scale_invariance():
    spec = synth.default_spec(samples_per_grade=2, seed=21)
    names = list(features.FEATURE_NAMES)
    mm_idx = [names.index(n) for n in ("area_mm2", "perimeter_mm", "major_axis_mm", "minor_axis_mm", "equiv_diameter_mm")]
    ratio_names = ("solidity", "eccentricity", "mean_r_norm", "mean_g_norm", "mean_b_norm", "defect_ratio", "wrinkle_ratio")
    ratio_idx = [names.index(n) for n in ratio_names]
    worst_mm = worst_ratio = 0.0
    for _, params in synth.draw_corpus(spec):
        a = features.extract_all(segment.fruit_view_from_image(synth.render_sample(params, spec))).values
        b = features.extract_all(segment.fruit_view_from_image(synth.render_sample(params, spec, 2.0))).values
        worst_mm = max(worst_mm, float(np.max(np.abs(b[mm_idx] - a[mm_idx]) / np.abs(a[mm_idx]))))
        worst_ratio = max(worst_ratio, float(np.max(np.abs(b[ratio_idx] - a[ratio_idx]))))
    verdict(
        "Scale invariance",
        worst_mm < 0.03 and worst_ratio < 0.02,
        f"max mm-slot change {100 * worst_mm:.2f}%, max ratio change {worst_ratio:.4f}",
    )
