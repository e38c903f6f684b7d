import math

import numpy as np
import pytest

from fovtok.metrics import (
    LossWeights,
    combined_loss,
    dice_loss,
    expected_iou,
    focal_loss,
    perturb_prompt,
    select_prompt,
)
from fovtok.pattern import make_pattern, token_count
from fovtok.tokenizer import FoveatedMask

from oracles import (
    bernoulli_expected_iou,
    brute_farthest_point,
    random_blob,
    random_expected_iou_case,
)

UNIT = make_pattern([(1, 1)], 1)  # a single 1-pixel sample
QUAD = make_pattern([(1, 2)], 1)  # four 1-pixel samples


def fmask(pattern, values, valid=None):
    n = token_count(pattern)
    t = pattern.patch_size
    data = np.asarray(values, dtype=np.float64).reshape(n, t, t)
    if valid is None:
        valid = np.ones(n, dtype=bool)
    return FoveatedMask(pattern=pattern, data=data, valid=valid)


class TestExpectedIou:
    def test_all_ones(self):
        p = fmask(QUAD, [1, 1, 1, 1])
        assert expected_iou(p, p) == 1.0

    def test_disjoint(self):
        p = fmask(QUAD, [1, 0, 0, 0])
        q = fmask(QUAD, [0, 0, 0, 0])
        assert expected_iou(p, q) == 0.0

    def test_two_sample_mixture(self):
        # samples (p, q) = (1, .5) and (0, .5): 0.5 / 1.5
        p = fmask(QUAD, [1, 0, 0, 0])
        q = fmask(QUAD, [0.5, 0.5, 0, 0])
        assert math.isclose(expected_iou(p, q), 1.0 / 3.0, rel_tol=0, abs_tol=1e-15)

    def test_both_empty_gives_one(self):
        z = fmask(QUAD, [0, 0, 0, 0])
        assert expected_iou(z, z) == 1.0

    def test_matches_bernoulli_enumeration(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            pred, target, p, q, w = random_expected_iou_case(rng)
            got = expected_iou(pred, target)
            want = bernoulli_expected_iou(p, q, w)
            assert abs(got - want) < 1e-10

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            pred, target, *_ = random_expected_iou_case(rng)
            assert expected_iou(pred, target) == expected_iou(target, pred)

    def test_binary_uniform_stride_equals_binary_iou(self):
        rng = np.random.default_rng(2)
        pattern = make_pattern([(1, 4)], 2)
        n, t = token_count(pattern), 2
        for _ in range(50):
            a = rng.integers(0, 2, (n, t, t)).astype(np.float64)
            b = rng.integers(0, 2, (n, t, t)).astype(np.float64)
            p = FoveatedMask(pattern=pattern, data=a, valid=np.ones(n, bool))
            q = FoveatedMask(pattern=pattern, data=b, valid=np.ones(n, bool))
            inter = float(np.logical_and(a, b).sum())
            union = float(np.logical_or(a, b).sum())
            want = 1.0 if union == 0 else inter / union
            assert expected_iou(p, q) == want

    def test_monotone_in_p_when_target_one(self):
        q = fmask(QUAD, [1, 1, 1, 1])
        values = [0.1, 0.4, 0.2, 0.9]
        base = expected_iou(fmask(QUAD, values), q)
        for k in range(4):
            bumped = list(values)
            bumped[k] = min(1.0, bumped[k] + 0.3)
            assert expected_iou(fmask(QUAD, bumped), q) >= base

    def test_pattern_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            expected_iou(fmask(QUAD, [1, 1, 1, 1]), fmask(UNIT, [1]))


class TestFocalDice:
    def test_focal_single_sample(self):
        # q=1, p=0.5, gamma=2 -> 0.25 * ln 2
        p = fmask(UNIT, [0.5])
        q = fmask(UNIT, [1.0])
        assert math.isclose(focal_loss(p, q), 0.25 * math.log(2.0), rel_tol=1e-12)

    def test_focal_zero_iff_exact_binary(self):
        ones = fmask(QUAD, [1, 1, 1, 1])
        zeros = fmask(QUAD, [0, 0, 0, 0])
        assert focal_loss(ones, ones) == pytest.approx(0.0, abs=1e-9)
        assert focal_loss(zeros, zeros) == pytest.approx(0.0, abs=1e-9)
        assert focal_loss(fmask(QUAD, [0.5] * 4), fmask(QUAD, [0.5] * 4)) > 0.0

    def test_focal_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            pred, target, *_ = random_expected_iou_case(rng)
            assert focal_loss(pred, target) >= 0.0

    def test_dice_zero_for_equal_binary(self):
        p = fmask(QUAD, [1, 0, 1, 0])
        assert dice_loss(p, p) == 0.0

    def test_dice_range(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            pred, target, *_ = random_expected_iou_case(rng)
            assert 0.0 <= dice_loss(pred, target) <= 1.0

    def test_dice_half_constant_limit(self):
        pattern = make_pattern([(1, 40)], 1)  # 1600 samples
        n = token_count(pattern)
        half = fmask(pattern, [0.5] * n)
        got = dice_loss(half, half)
        # 1 - (2*0.25*n + 1) / (n + 1), approaches 0.5 from below
        assert got == pytest.approx(1.0 - (0.5 * n + 1.0) / (n + 1.0), rel=1e-12)
        assert abs(got - 0.5) < 1e-3


class TestCombinedLoss:
    def test_single_mask(self):
        target = fmask(QUAD, [1, 0, 1, 0])
        pred = fmask(QUAD, [0.9, 0.1, 0.8, 0.2])
        weights = LossWeights()
        total, best = combined_loss([pred], [0.7], target, weights)
        assert best == 0
        want = (
            weights.focal * focal_loss(pred, target)
            + weights.dice * dice_loss(pred, target)
            + weights.iou * (0.7 - expected_iou(pred, target)) ** 2
        )
        assert total == pytest.approx(want, rel=1e-12)

    def test_perfect_mask_selected(self):
        target = fmask(QUAD, [1, 0, 1, 0])
        candidates = [
            fmask(QUAD, [0.2, 0.9, 0.3, 0.7]),
            fmask(QUAD, [1, 0, 1, 0]),
            fmask(QUAD, [0.5, 0.5, 0.5, 0.5]),
        ]
        _, best = combined_loss(candidates, [0.5, 0.5, 0.5], target)
        assert best == 1

    def test_recomposition(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            pred1, target, *_ = random_expected_iou_case(rng)
            pred2 = FoveatedMask(
                pattern=pred1.pattern,
                data=np.where(pred1.valid[:, None, None], rng.random(pred1.data.shape), 0.0),
                valid=pred1.valid,
            )
            ious = [float(rng.random()), float(rng.random())]
            weights = LossWeights(focal=3.0, dice=0.5, iou=0.2)
            total, best = combined_loss([pred1, pred2], ious, target, weights)
            per_mask = [
                3.0 * focal_loss(m, target) + 0.5 * dice_loss(m, target)
                for m in (pred1, pred2)
            ]
            want_best = int(np.argmin(per_mask))
            want = per_mask[want_best] + 0.2 * sum(
                (iou - expected_iou(m, target)) ** 2
                for m, iou in zip((pred1, pred2), ious)
            )
            assert best == want_best
            assert total == pytest.approx(want, rel=1e-12)

    def test_argmin_invariant_to_rescaling(self):
        rng = np.random.default_rng(6)
        target = fmask(QUAD, [1, 1, 0, 0])
        masks = [fmask(QUAD, rng.random(4)) for _ in range(3)]
        _, best1 = combined_loss(masks, [0.5] * 3, target, LossWeights(20.0, 1.0, 0.01))
        _, best2 = combined_loss(masks, [0.5] * 3, target, LossWeights(200.0, 10.0, 0.01))
        assert best1 == best2

    def test_tie_breaks_low_index(self):
        target = fmask(QUAD, [1, 0, 1, 0])
        same = fmask(QUAD, [0.6, 0.4, 0.6, 0.4])
        _, best = combined_loss([same, same], [0.5, 0.5], target)
        assert best == 0

    def test_empty_masks_rejected(self):
        with pytest.raises(ValueError):
            combined_loss([], [], fmask(QUAD, [1, 0, 1, 0]))


class TestSelectPrompt:
    def test_single_pixel(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[3, 6] = True
        assert select_prompt(mask) == (6, 3)

    def test_centered_block(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[1:4, 1:4] = True
        assert select_prompt(mask) == (2, 2)

    def test_border_counts_as_boundary(self):
        mask = np.ones((5, 9), dtype=bool)
        assert select_prompt(mask) == (2, 2)  # first of the deep middle-row ties

    def test_matches_brute_force_on_random_blobs(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            h, w = int(rng.integers(4, 65)), int(rng.integers(4, 65))
            mask = random_blob(rng, h, w)
            assert select_prompt(mask) == brute_farthest_point(mask)

    def test_empty_mask(self):
        with pytest.raises(ValueError, match="empty mask"):
            select_prompt(np.zeros((4, 4), dtype=bool))


class TestPerturbPrompt:
    def test_sigma_zero_identity(self):
        rng = np.random.default_rng(8)
        assert perturb_prompt((5, 9), 0.0, rng, (100, 100)) == (5, 9)

    def test_deterministic_given_seed(self):
        a = perturb_prompt((50, 50), 3.0, np.random.default_rng(42), (100, 100))
        b = perturb_prompt((50, 50), 3.0, np.random.default_rng(42), (100, 100))
        assert a == b

    def test_sample_std_close_to_sigma(self):
        rng = np.random.default_rng(9)
        sigma = 8.0
        points = np.array(
            [perturb_prompt((500, 500), sigma, rng, (1001, 1001)) for _ in range(100_000)]
        )
        for axis in range(2):
            std = points[:, axis].std()
            assert abs(std - sigma) / sigma < 0.02

    def test_clamped_to_bounds(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            x, y = perturb_prompt((0, 0), 50.0, rng, (10, 8))
            assert 0 <= x < 10 and 0 <= y < 8

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            perturb_prompt((0, 0), -1.0, np.random.default_rng(0), (10, 10))
