"""End-to-end acceptance gate.

One test per release criterion; each records a PASS/FAIL line that the
terminal summary prints after the run.
"""

import time

import numpy as np

from uqseg import (RunConfig, SampleStack, SigmoidPredictor, binarize,
                   decompose, default_ood_threshold, generate_dataset,
                   generate_phantom, image_uncertainty_score, iou, kl_bits,
                   min_area_rect, noise_raster, ood_flag, process_case,
                   sample_spec, unc_error_histogram)
from uqseg.cli import main
from uqseg.geometry import fit_ellipse
from uqseg.raster import BinaryMask, Raster
from uqseg.tta import (AugmentationPriors, TransformSpec, apply_transform,
                       invert_spatial, sample_transform)


def _phantom_records(kind: str, count: int, seed: int):
    # noiseless and unblurred: the binarized prediction equals the analytic
    # pixel-center mask, so the only measurement error is quantization
    rng = np.random.default_rng(seed)
    predictor = SigmoidPredictor()
    config = RunConfig(method="baseline", seed=seed)
    out = []
    for i in range(count):
        spec = sample_spec(kind, rng, noise_sigma=0.0, blur_passes=0)
        image, gt_mask, meta = generate_phantom(spec, seed=seed * 1000 + i)
        out.append((spec, process_case(image, meta, config, predictor, gt_mask)))
    return out


def test_head_circumference_recovery(criterion):
    with criterion("phantom head-circumference recovery") as entry:
        start = time.perf_counter()
        cases = _phantom_records("head", 20, seed=1)
        elapsed = time.perf_counter() - start
        errors = [r.record.rel_error_pct for _, r in cases]
        assert all(e is not None for e in errors)
        assert max(errors) < 2.0, f"worst relative error {max(errors):.3f}%"
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        entry["detail"] = (f"20/20 within 2% of analytic circumference, "
                           f"worst {max(errors):.3f}%, {elapsed:.2f}s")


def test_femur_length_recovery(criterion):
    with criterion("phantom femur-length recovery") as entry:
        start = time.perf_counter()
        cases = _phantom_records("femur", 20, seed=2)
        elapsed = time.perf_counter() - start
        gaps = [abs(r.record.measurement.value_px - spec.length)
                for spec, r in cases]
        assert max(gaps) <= 2.0, f"worst length gap {max(gaps):.3f}px"
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        entry["detail"] = (f"20/20 within 2px of analytic length, "
                           f"worst {max(gaps):.3f}px, {elapsed:.2f}s")


def test_decomposition_identity(criterion):
    with criterion("uncertainty decomposition identity") as entry:
        rng = np.random.default_rng(3)
        worst_identity = 0.0
        worst_dual = 0.0
        for _ in range(100):
            probs = rng.uniform(0.01, 0.99, size=(8, 32, 32))
            maps = decompose(SampleStack(probs, "mcd"))
            gap = np.abs(maps.total_entropy.values
                         - maps.expected_entropy.values
                         - maps.mutual_information.values).max()
            worst_identity = max(worst_identity, float(gap))

            dist = np.stack([1.0 - probs, probs], axis=-1)
            mean_fg = maps.mean_prob.values
            mean_dist = np.stack([1.0 - mean_fg, mean_fg], axis=-1)
            dual = kl_bits(dist, mean_dist).mean(axis=0)
            dual_gap = np.abs(maps.mutual_information.values - dual).max()
            worst_dual = max(worst_dual, float(dual_gap))
        assert worst_identity <= 1e-9
        assert worst_dual <= 1e-9
        entry["detail"] = (f"100 stacks: max |total-(data+model)| "
                           f"{worst_identity:.2e}, max dual-MI gap {worst_dual:.2e}")


def test_mi_nonnegativity_and_degeneracies(criterion):
    with criterion("MI nonnegativity and degeneracies") as entry:
        rng = np.random.default_rng(4)
        for _ in range(100):
            probs = rng.random((rng.integers(1, 10), 16, 16))
            maps = decompose(SampleStack(probs, "mcd"))
            assert (maps.mutual_information.values >= 0.0).all()
        for t in (2, 3, 5, 8):
            maps = decompose(SampleStack(np.full((t, 16, 16), 0.37), "mcd"))
            assert (maps.mutual_information.values == 0.0).all()
            assert (maps.ekl.values == 0.0).all()
            assert (maps.variance.values == 0.0).all()
        single = decompose(SampleStack(rng.random((1, 16, 16)), "baseline"))
        assert (single.mutual_information.values == 0.0).all()
        entry["detail"] = ("MI >= 0 on 100 random stacks; identical-sample and "
                           "T=1 stacks exactly zero")


def _smooth_map(w=96, h=96) -> np.ndarray:
    y, x = np.mgrid[0:h, 0:w]
    v = (np.sin(2 * np.pi * x / 48.0) + np.cos(2 * np.pi * y / 36.0)
         + np.sin(2 * np.pi * (x + y) / 64.0))
    return (v - v.min()) / (v.max() - v.min())


def test_tta_round_trip(criterion):
    with criterion("TTA spatial round-trip") as entry:
        values = _smooth_map()
        probmap = Raster(values, "probability")

        flipped = apply_transform(Raster(values, "intensity"),
                                  TransformSpec(hflip=True, brightness_delta=0.0,
                                                contrast_factor=1.0,
                                                noise_sigma=0.0))
        back = invert_spatial(Raster(flipped.values, "probability"),
                              TransformSpec(hflip=True))
        assert np.array_equal(back.values, probmap.values), "hflip not bit-exact"

        rng = np.random.default_rng(5)
        priors = AugmentationPriors()
        band = (slice(10, -10), slice(10, -10))
        worst = 0.0
        for _ in range(100):
            spec = sample_transform(priors, rng)
            spatial = TransformSpec(hflip=spec.hflip,
                                    rotation_deg=spec.rotation_deg,
                                    scale=spec.scale,
                                    translate_frac=spec.translate_frac,
                                    brightness_delta=0.0, contrast_factor=1.0,
                                    noise_sigma=0.0)
            warped = apply_transform(Raster(values, "intensity"), spatial)
            back = invert_spatial(Raster(warped.values, "probability"), spatial)
            err = float(np.abs(back.values[band] - values[band]).mean())
            worst = max(worst, err)
        assert worst <= 0.02, f"worst interior-band error {worst:.4f}"
        entry["detail"] = (f"hflip bit-exact; 100 random specs worst "
                           f"interior-band error {worst:.4f} <= 0.02")


def test_iou_oracle_equivalence(criterion):
    with criterion("IOU oracle equivalence") as entry:
        rng = np.random.default_rng(6)
        for _ in range(200):
            a = rng.random((16, 16)) > rng.uniform(0.2, 0.8)
            b = rng.random((16, 16)) > rng.uniform(0.2, 0.8)
            inter = np.logical_and(a, b).sum()
            union = np.logical_or(a, b).sum()
            expected = float(inter) / float(union) if union else 1.0
            assert iou(BinaryMask(a), BinaryMask(b)) == expected
        entry["detail"] = "exact match with set-based oracle on 200 random pairs"


def test_calipers_oracle(criterion):
    with criterion("minimum-area rectangle oracle") as entry:
        rng = np.random.default_rng(7)
        sweep = np.deg2rad(np.arange(0.0, 90.0, 0.1))
        cos, sin = np.cos(sweep), np.sin(sweep)
        worst_ratio = 0.0
        for _ in range(100):
            pts = rng.uniform(-40.0, 40.0, size=(int(rng.integers(3, 40)), 2))
            rect = min_area_rect(pts)
            # dense rotation sweep: axis-aligned bbox area per angle
            xs = pts[:, 0][:, None] * cos + pts[:, 1][:, None] * sin
            ys = -pts[:, 0][:, None] * sin + pts[:, 1][:, None] * cos
            areas = (xs.max(axis=0) - xs.min(axis=0)) * (ys.max(axis=0) - ys.min(axis=0))
            oracle = float(areas.min())
            area = rect.side_long * rect.side_short
            assert area <= oracle * 1.005
            if oracle > 0:
                worst_ratio = max(worst_ratio, area / oracle)

        pts = rng.uniform(0.0, 50.0, size=(30, 2))
        ref = min_area_rect(pts)
        for deg in (17.0, 45.0, 123.456):
            th = np.deg2rad(deg)
            rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
            r = min_area_rect(pts @ rot.T)
            assert abs(r.side_long - ref.side_long) <= 1e-9
            assert abs(r.side_short - ref.side_short) <= 1e-9
        entry["detail"] = (f"100 point sets within 0.1-degree sweep oracle "
                           f"(worst ratio {worst_ratio:.6f}); lengths "
                           f"rotation-invariant to 1e-9")


def test_ellipse_fit_exactness(criterion):
    with criterion("ellipse-fit exactness") as entry:
        rng = np.random.default_rng(8)
        worst = 0.0
        for _ in range(50):
            a = rng.uniform(20.0, 80.0)
            b = a / rng.uniform(1.0, 6.0)
            theta = rng.uniform(0.0, 180.0)
            cx, cy = rng.uniform(50.0, 150.0, size=2)
            t = np.linspace(0.0, 2.0 * np.pi, 400, endpoint=False)
            th = np.deg2rad(theta)
            x = a * np.cos(t)
            y = b * np.sin(t)
            pts = np.column_stack([cx + x * np.cos(th) - y * np.sin(th),
                                   cy + x * np.sin(th) + y * np.cos(th)])
            fit = fit_ellipse(pts)
            worst = max(worst, abs(fit.semi_major - a) / a,
                        abs(fit.semi_minor - b) / b)
        assert worst < 1e-3
        entry["detail"] = f"50 noiseless configs, worst axis error {worst:.2e} relative"


def test_uncertainty_error_curve_rise(criterion):
    with criterion("uncertainty-vs-error curve rise") as entry:
        rng = np.random.default_rng(9)
        predictor = SigmoidPredictor()
        config = RunConfig(method="tta", samples=8, seed=11)
        hist_cases = []
        for i in range(30):
            spec = sample_spec("head", rng, noise_sigma=0.15)
            image, gt_mask, meta = generate_phantom(spec, seed=4000 + i)
            result = process_case(image, meta, config, predictor, gt_mask)
            assert result.record.error is None
            hist_cases.append((result.maps.expected_entropy, result.mask, gt_mask))
        hist = unc_error_histogram(hist_cases, bin_width=0.05)
        occupied = [k for k, c in enumerate(hist.contributors) if c > 0]
        bottom, top = occupied[0], occupied[-1]
        assert hist.curve[top] > hist.curve[bottom], (
            f"top bin rate {hist.curve[top]:.4f} vs bottom {hist.curve[bottom]:.4f}")
        entry["detail"] = (f"30 noisy phantoms: error rate {hist.curve[bottom]:.4f} "
                           f"in bottom uncertainty bin vs {hist.curve[top]:.4f} in top")


def test_ood_separation(criterion):
    with criterion("out-of-domain score separation") as entry:
        rng = np.random.default_rng(10)
        predictor = SigmoidPredictor()
        config = RunConfig(method="tta", samples=8, seed=12)

        def score(image, meta):
            result = process_case(image, meta, config, predictor)
            return result.record.uncertainty_score

        phantom_scores = []
        for i in range(10):
            spec = sample_spec("head", rng, noise_sigma=0.02)
            image, _, meta = generate_phantom(spec, seed=5000 + i)
            phantom_scores.append(score(image, meta))
        noise_scores = []
        for i in range(10):
            image = noise_raster(128, 128, seed=6000 + i)
            from uqseg.raster import Calibration, CaseMeta
            meta = CaseMeta(case_id=f"noise_{i:04d}", modality="unknown",
                            calibration=Calibration(0.1))
            noise_scores.append(score(image, meta))

        assert np.mean(noise_scores) > np.mean(phantom_scores)
        threshold = default_ood_threshold(phantom_scores)
        flags = [ood_flag(s, threshold) for s in noise_scores]
        assert all(flags), f"flag fired on {sum(flags)}/10 noise images"
        assert not any(ood_flag(s, threshold) for s in phantom_scores)
        entry["detail"] = (f"mean score {np.mean(noise_scores):.3f} (noise) vs "
                           f"{np.mean(phantom_scores):.3f} (phantom); "
                           f"10/10 noise images flagged at default threshold")


def test_run_reproducibility(criterion, tmp_path):
    with criterion("seeded runs byte-identical") as entry:
        data = tmp_path / "data"
        assert main(["phantom", "--kind", "head", "--count", "5", "--seed", "21",
                     "--out", str(data)]) == 0
        args = ["run", "--dataset", str(data), "--method", "tta",
                "--samples", "4", "--seed", "77"]
        assert main(args + ["--out", str(tmp_path / "r1")]) == 0
        assert main(args + ["--out", str(tmp_path / "r2")]) == 0

        files1 = sorted(p.relative_to(tmp_path / "r1")
                        for p in (tmp_path / "r1").rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(tmp_path / "r2")
                        for p in (tmp_path / "r2").rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            b1 = (tmp_path / "r1" / rel).read_bytes()
            b2 = (tmp_path / "r2" / rel).read_bytes()
            assert b1 == b2, f"{rel} differs between identical runs"
        entry["detail"] = (f"two seeded runs produced {len(files1)} "
                           f"byte-identical files")
