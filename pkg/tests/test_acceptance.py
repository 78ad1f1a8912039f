"""Acceptance suite: one pass/fail line per criterion, listed in the pytest
terminal summary under "acceptance criteria"."""

import os
import time

import numpy as np
import pytest
import torch

from conftest import ACCEPTANCE_LINES
from oracles import concordance_auc, lof, mahalanobis, min_eer_gap
from planktonad import features as ft
from planktonad.autoencoder import ALL_CORES, ALL_PAIRS, AutoEncoder, ReconstructionTriplet, build_model, kl_divergence
from planktonad.evaluation import ConfusionCounts, binary_metrics, f1_score, roc_auc
from planktonad.oneclass import Classifier, fit_one_class, select_threshold_eer
from planktonad.runner import enumerate_combinations, load_config, run_grid
from planktonad.runner import pipeline

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def report(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    assert ok, detail


def test_1_metric_reproduction():
    t0 = time.perf_counter()
    f1 = f1_score(0.94, 0.79)
    p = np.random.default_rng(0).random(100)
    worst = max(abs(f1_score(v, v) - v) for v in p)
    # the same identity through the confusion-count path
    _, _, _, f1_counts = binary_metrics(ConfusionCounts(tp=47, tn=40, fp=3, fn=10))
    prec, rec = 47 / 50, 47 / 57
    elapsed = time.perf_counter() - t0
    ok = abs(f1 - 0.86) <= 0.005 and worst <= 1e-12 and abs(f1_counts - 2 * prec * rec / (prec + rec)) <= 1e-12
    report(1, "metric reproduction", ok and elapsed < 1.0,
           f"F1(0.94, 0.79) = {f1:.4f}; max |F1(p,p) - p| = {worst:.1e} over 100 p; {elapsed:.3f} s")


def test_2_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    ref = rng.random((200, 2))
    query = np.vstack([ref, rng.uniform(-0.5, 1.5, (100, 2))])
    lof_err = np.max(np.abs(fit_one_class(Classifier.LOF, ref).scores(query) - lof(ref, query, 20)))

    x = rng.multivariate_normal([0.5, -1.0], [[1.5, 0.4], [0.4, 0.8]], size=200)
    rc = fit_one_class(Classifier.RobustCovariance, x)
    q = rng.normal(size=(100, 2)) * 2
    maha_err = np.max(np.abs(rc.scores(q) - mahalanobis(x[rc.state["support"]], q)))

    auc_err = 0.0
    for seed in range(20):
        r = np.random.default_rng(seed)
        scores = np.round(r.random(50), 1)
        nok = r.random(50) < 0.5
        nok[:2] = [True, False]
        auc_err = max(auc_err, abs(roc_auc(scores, nok)[1] - concordance_auc(scores, nok)))
    elapsed = time.perf_counter() - t0
    ok = lof_err <= 1e-6 and maha_err <= 1e-6 and auc_err <= 1e-9 and elapsed < 10
    report(2, "brute-force oracle equivalence", ok,
           f"LOF {lof_err:.1e}, Mahalanobis {maha_err:.1e}, AUC {auc_err:.1e}; {elapsed:.2f} s")


def test_3_eer_property():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    violations = 0
    for _ in range(500):
        n = int(rng.integers(2, 60))
        scores = np.round(rng.normal(size=n), int(rng.integers(0, 3)))
        nok = rng.random(n) < rng.uniform(0.2, 0.8)
        nok[0], nok[-1] = True, False
        t = select_threshold_eer(scores, nok)
        if abs(t.fpr - t.fnr) > min_eer_gap(scores, nok) + 1e-12:
            violations += 1
    separable_ok = True
    for _ in range(20):
        ok_s, nok_s = rng.random(15), rng.random(15) + 1.5
        t = select_threshold_eer(np.r_[ok_s, nok_s], np.r_[np.zeros(15, bool), np.ones(15, bool)])
        separable_ok &= t.fpr == 0.0 and t.fnr == 0.0
    elapsed = time.perf_counter() - t0
    report(3, "EER property suite", violations == 0 and separable_ok and elapsed < 10,
           f"{violations} violations in 500 random sets; separable sets EER 0: {separable_ok}; {elapsed:.2f} s")


def test_4_architecture_shapes():
    t0 = time.perf_counter()
    torch.manual_seed(0)
    x = torch.rand(2, 1, 128, 256)
    bad = []
    for core in ALL_CORES:
        for pair in ALL_PAIRS:
            net = AutoEncoder(build_model(core, pair, (128, 256, 1))).eval()
            with torch.no_grad():
                if net(x)["recon"].shape != x.shape:
                    bad.append(f"{pair.value}-{core.value}")
    q = AutoEncoder(build_model("VQVAE1", "ConvM3", (32, 32, 1))).quantizer
    q.codebook.weight.data.normal_()
    z_e = torch.randn(4, 64, 8, 8)
    with torch.no_grad():
        _, idx = q(z_e)
    flat = z_e.permute(0, 2, 3, 1).reshape(-1, 64)
    brute = torch.cdist(flat, q.codebook.weight.detach()).argmin(1)
    vq_ok = bool(torch.equal(idx.flatten(), brute))
    g = torch.Generator().manual_seed(4)
    kl_min = min(float(kl_divergence(torch.randn(8, 16, generator=g) * 2, torch.randn(8, 16, generator=g) * 2))
                 for _ in range(100))
    kl_zero = float(kl_divergence(torch.zeros(8, 16), torch.zeros(8, 16)))
    elapsed = time.perf_counter() - t0
    ok = not bad and vq_ok and kl_min >= 0 and kl_zero == 0.0 and elapsed < 300
    report(4, "architecture shape suite", ok,
           f"30 combinations at 128x256x1, mismatches {bad or 'none'}; VQ brute force {vq_ok}; "
           f"min KL {kl_min:.3g}, KL(0,0) = {kl_zero}; {elapsed:.1f} s")


def test_5_feature_invariants():
    t0 = time.perf_counter()
    desc = ft.RandomProjectionDescriptor()
    rng = np.random.default_rng(5)
    img = rng.random((128, 256, 1)).astype(np.float32)
    noisy = ReconstructionTriplet.from_pair(img, np.clip(img + rng.normal(0, 0.2, img.shape), 0, 1))
    identity = ReconstructionTriplet.from_pair(img, img)
    expected = {"ErrMetrics": 4, "SIFT": 6, "HardNet1": 128, "HardNet2": 32, "HardNet3": 32, "HardNet4": 32}
    lengths = {k: len(ft.extract_features(k, noisy, desc).values) for k in expected}
    err = ft.extract_features("ErrMetrics", identity, desc).values
    h3_id = ft.extract_features("HardNet3", identity, desc).values
    h3 = np.concatenate([ft.extract_features("HardNet3", ReconstructionTriplet.from_pair(
        img, np.clip(img + rng.normal(0, s, img.shape), 0, 1)), desc).values for s in (0.05, 0.3, 1.0)])
    elapsed = time.perf_counter() - t0
    ok = (lengths == expected and np.allclose(err, [0, 1, 0, 0], atol=1e-12) and np.allclose(h3_id, 1, atol=1e-12)
          and h3.min() >= -1 and h3.max() <= 1 and elapsed < 30)
    report(5, "feature invariants", ok,
           f"lengths {lengths}; identity ErrMetrics {np.round(err, 12).tolist()}; identity HardNet3 all ones "
           f"{bool(np.allclose(h3_id, 1))}; HardNet3 range [{h3.min():.3f}, {h3.max():.3f}]; {elapsed:.1f} s")


@pytest.mark.slow
def test_6_synthetic_end_to_end(tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(os.path.join(CONFIGS, "synthetic.yaml"), environ={}, overrides={
        "features": {"extractors": ["ErrMetrics", "HardNet3"]},
        "classifier": {"kinds": ["RobustCovariance", "LOF"]},
        "output": {"dir": str(tmp_path), "grid_id": "acceptance6"},
    })
    result = run_grid(cfg)
    elapsed = time.perf_counter() - t0
    f1 = {cid: r.f1 for cid, r in sorted(result.reports.items())}
    gate = f1.get("ConvM3-BAE1/ErrMetrics/RobustCovariance", 0.0)
    detail = ", ".join(f"{cid.split('/', 1)[1]} {v:.3f}" for cid, v in f1.items())
    report(6, "synthetic end-to-end", gate >= 0.9 and elapsed <= 900 and not result.failed(),
           f"500 OK / 100 NOK at 128x128, BAE1+ConvM3, test F1: {detail}; {elapsed:.0f} s")


PLANKTON_DATA = os.environ.get("PLANKTON_COCO")


@pytest.mark.slow
def test_7_real_data_stretch(tmp_path):
    if not PLANKTON_DATA:
        ACCEPTANCE_LINES.append("[7] SKIP  real-data stretch: published dataset not available "
                                "(set PLANKTON_COCO to its COCO annotation file)")
        pytest.skip("published dataset not available")
    achieved = {}
    for species, target in (("Aphanizomenon", 0.83), ("all", 0.75)):
        cfg = load_config(None, environ={}, overrides={
            "dataset": {"source": "coco", "path": PLANKTON_DATA, "species": species},
            "model": {"cores": ["VQVAE1"], "conv_pairs": ["ConvM2"]},
            "features": {"extractors": ["HardNet1"], "descriptor_weights": os.environ.get("HARDNET_WEIGHTS")},
            "classifier": {"kinds": ["LOF"]},
            "output": {"dir": str(tmp_path), "grid_id": f"stretch-{species}"},
        })
        achieved[species] = (pipeline.run_experiment(cfg).f1, target)
    ok = all(abs(f1 - target) <= 0.10 for f1, target in achieved.values())
    report(7, "real-data stretch", ok,
           "; ".join(f"{s} F1 {f1:.3f} (target {t:.2f} +/- 0.10)" for s, (f1, t) in achieved.items()))


@pytest.mark.slow
def test_8_grid_bookkeeping(tmp_path, monkeypatch):
    t0 = time.perf_counter()
    full = enumerate_combinations(ALL_CORES, ALL_PAIRS, ft.ALL_EXTRACTORS, list(Classifier))
    n_ids, n_models = len({c.id for c in full}), len({c.model_name for c in full})

    cfg = load_config(None, environ={}, overrides={
        "dataset": {"source": "synthetic", "species": "Synthetic", "image_size": [64, 64],
                    "synthetic": {"n_ok": 100, "n_nok": 20, "size": [64, 64], "seed": 8}},
        "split": {"val_count": 10, "test_count": 10},
        "model": {"cores": ["BAE1"], "conv_pairs": ["ConvM3"]},
        "training": {"epochs": 3, "learning_rate": 1e-3, "batch_size": 16},
        "features": {"extractors": [e.value for e in ft.ALL_EXTRACTORS]},
        "classifier": {"kinds": [c.value for c in Classifier]},
        "output": {"dir": str(tmp_path), "grid_id": "restricted"},
    })
    first = run_grid(cfg)
    reports_ok = len(first.reports) == 24 and first.trainings == 1 and len(set(first.checkpoint_hashes.values())) == 1

    # interrupt a fresh run after 10 cells, then resume it
    interrupted_cfg = cfg.with_overrides(output={"grid_id": "interrupted"})
    real_cell = pipeline._run_cell
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        if calls["n"] == 10:
            raise KeyboardInterrupt
        calls["n"] += 1
        return real_cell(*args, **kwargs)

    monkeypatch.setattr(pipeline, "_run_cell", flaky)
    with pytest.raises(KeyboardInterrupt):
        run_grid(interrupted_cfg)
    monkeypatch.setattr(pipeline, "_run_cell", real_cell)
    root = pipeline.grid_root(interrupted_cfg)
    done_before = pipeline.GridIndex(root, "interrupted", "Synthetic", fresh=False).completed(root)
    stamps = {cid: (root / pipeline.Combination.parse(cid).dirname / "report.json").stat().st_mtime_ns
              for cid in done_before}
    resumed = run_grid(interrupted_cfg, resume=True)
    untouched = all((root / pipeline.Combination.parse(cid).dirname / "report.json").stat().st_mtime_ns == s
                    for cid, s in stamps.items())
    resume_ok = (len(done_before) == 10 and resumed.trainings == 0 and len(resumed.reports) == 24 and untouched
                 and resumed.reports == first.reports)
    elapsed = time.perf_counter() - t0
    report(8, "grid bookkeeping", n_ids == 720 and n_models == 30 and reports_ok and resume_ok and elapsed < 1200,
           f"full enumeration {n_ids} ids / {n_models} models; restricted grid {len(first.reports)} reports from "
           f"{first.trainings} training; resume after {len(done_before)} cells retrained {resumed.trainings} "
           f"models and left finished cells untouched: {untouched}; {elapsed:.0f} s")
