"""
Maskgen App - Services

Three-stage mask generation:
1. heatmap: survivability of the full target mask with one patch removed;
2. coarse: binary search for the shortest high-survivability suffix of
   the impact-sorted patches;
3. fine: one greedy pass removing patches while J strictly decreases.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, wait

import numpy as np
from django.conf import settings

from core.exceptions import BudgetExceededError, InvalidArgumentError
from imaging.domain import Mask
from imaging.services import ImagingService
from survivability.domain import ABOVE, EXACT
from survivability.services import SurvivabilityService
from .domain import (
    COARSE_ONLY, FINE_ONLY, TARGET, VICTIM,
    FineOutcome, HeatmapResult, MaskGenerationResult, ReductionOutcome,
)

logger = logging.getLogger('patch_attack')

HEATMAP, COARSE, FINE = 'heatmap', 'coarse', 'fine'


class MaskGenService:
    """Service class for mask generation."""

    @staticmethod
    def target_delta(x, x_tar, object_grid):
        """delta_tar = x_tar - x on the plane of object_grid."""
        height, width = np.asarray(object_grid).shape
        return ImagingService.plane_difference(x, x_tar, width, height)

    @staticmethod
    def _workers(cfg, oracle):
        workers = settings.PATCH_ATTACK_WORKERS if cfg.workers is None else cfg.workers
        return workers if oracle.concurrent_safe else 1

    @staticmethod
    def heatmap(x, x_tar, y_adv, grid, dist, cfg, oracle, ledger, seed, relative_to=TARGET):
        """
        s_rho for every patch, plus the baseline; n * (|P| + 1) queries.

        Every estimate shares ``seed`` so all patches are compared under the
        same transforms.
        """
        if relative_to not in (TARGET, VICTIM):
            raise InvalidArgumentError(f'relative_to must be target or victim, got "{relative_to}"')
        d_tar = MaskGenService.target_delta(x, x_tar, grid.object)
        start = (Mask.full if relative_to == TARGET else Mask.empty)(grid.object)
        workers = MaskGenService._workers(cfg, oracle)

        def survivability(m):
            return SurvivabilityService.estimate(
                x, m, d_tar, y_adv, dist, cfg.n, oracle, ledger, seed, phase=HEATMAP, workers=1,
            )

        def candidate(patch):
            if relative_to == TARGET:
                return ImagingService.mask_minus(start, patch)
            return ImagingService.mask_union([patch], grid.object)

        baseline = survivability(start)

        per_patch = []
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(survivability, candidate(p)) for p in grid]
                wait(futures)
            failure = None
            for patch, future in zip(grid, futures):
                error = future.exception()
                if error is None:
                    per_patch.append((patch.index, future.result().value))
                elif failure is None:
                    failure = error
            if failure is not None:
                if isinstance(failure, BudgetExceededError):
                    failure.partial = HeatmapResult(tuple(per_patch), baseline, len(grid), relative_to)
                raise failure
        else:
            for patch in grid:
                try:
                    per_patch.append((patch.index, survivability(candidate(patch)).value))
                except BudgetExceededError as e:
                    e.partial = HeatmapResult(tuple(per_patch), baseline, len(grid), relative_to)
                    raise

        result = HeatmapResult(tuple(per_patch), baseline, len(grid), relative_to)
        logger.info(
            f'Heatmap ({relative_to}) over {len(grid)} patches: baseline {baseline.value:.3f}, '
            f'max impact {max((i for _, i in result.impacts()), default=0.0):.3f}'
        )
        return result

    @staticmethod
    def suffix_union(heatmap, grid, pivot):
        """Union of sorted patches pivot..|P| (1-indexed)."""
        order = heatmap.order()
        return ImagingService.mask_union([grid[i] for i in order[pivot - 1:]], grid.object)

    @staticmethod
    def coarse_reduce(heatmap, grid, x, x_tar, y_adv, dist, cfg, oracle, ledger, seed):
        """
        Largest pivot whose suffix union still reaches s_hi, by binary search.

        Assumes survivability shrinks along shorter suffixes. Falls back to
        the union of all patches when even that misses s_hi. At most
        ceil(log2 |P|) + 1 estimates.
        """
        if not heatmap.complete:
            raise InvalidArgumentError('coarse_reduce needs a complete heatmap')
        d_tar = MaskGenService.target_delta(x, x_tar, grid.object)
        count = len(grid)
        evaluations = 0
        cache = {}

        def evaluate(pivot):
            nonlocal evaluations
            if pivot not in cache:
                m = MaskGenService.suffix_union(heatmap, grid, pivot)
                threshold = cfg.s_hi if cfg.early_exit else None
                est = SurvivabilityService.estimate(
                    x, m, d_tar, y_adv, dist, cfg.n, oracle, ledger, seed,
                    phase=COARSE, threshold=threshold,
                )
                evaluations += 1
                cache[pivot] = (m, est)
            return cache[pivot]

        def reaches(est):
            return est.value >= cfg.s_hi if est.decision == EXACT else est.decision == ABOVE

        full_union = MaskGenService.suffix_union(heatmap, grid, 1)
        if heatmap.relative_to == TARGET and np.array_equal(full_union.bits, grid.object):
            cache[1] = (full_union, heatmap.baseline_estimate)

        if not reaches(evaluate(1)[1]):
            m, est = cache[1]
            logger.info(f'Coarse: s_hi={cfg.s_hi} unreachable, keeping all {count} patches')
            return ReductionOutcome(m, 1, est, False, evaluations)

        lo, hi = 1, count
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if reaches(evaluate(mid)[1]):
                lo = mid
            else:
                hi = mid - 1

        m, est = cache[lo]
        logger.info(
            f'Coarse: pivot {lo}/{count}, {m.size()} px, S={est.value:.3f} '
            f'({evaluations} estimates)'
        )
        return ReductionOutcome(m, lo, est, True, evaluations)

    @staticmethod
    def objective_j(m, s, cfg):
        """J = lambda1 * |M| / |object| + (1 - S); infinite when S < s_lo."""
        if not 0.0 <= s <= 1.0:
            raise InvalidArgumentError(f'Survivability must be in [0, 1], got {s}')
        if s < cfg.s_lo:
            return math.inf
        return cfg.lambda1 * m.object_ratio() + (1.0 - s)

    @staticmethod
    def fine_reduce(m0, heatmap, grid, x, x_tar, y_adv, dist, cfg, oracle, ledger, seed, s0=None):
        """
        One pass over the patches, least to most impactful, removing each
        one whose removal strictly lowers J. Patches already gone from the
        mask are skipped without a query.
        """
        d_tar = MaskGenService.target_delta(x, x_tar, grid.object)

        def survivability(m):
            return SurvivabilityService.estimate(
                x, m, d_tar, y_adv, dist, cfg.n, oracle, ledger, seed, phase=FINE,
            )

        current = m0
        current_est = s0 if s0 is not None else survivability(m0)
        j_current = MaskGenService.objective_j(current, current_est.value, cfg)
        j_trace = [j_current]
        accepted, rejected, skipped = [], [], []

        for index in heatmap.order():
            patch = grid[index]
            if not (current.bits & patch.pixels).any():
                skipped.append(index)
                continue
            candidate = ImagingService.mask_minus(current, patch)
            est = survivability(candidate)
            j = MaskGenService.objective_j(candidate, est.value, cfg)
            if j < j_current:
                current, current_est, j_current = candidate, est, j
                j_trace.append(j)
                accepted.append(index)
            else:
                rejected.append(index)

        logger.info(
            f'Fine: removed {len(accepted)} patches, {current.size()} px left, '
            f'S={current_est.value:.3f}, J={j_current:.4f}'
        )
        return FineOutcome(current, current_est, tuple(j_trace), tuple(accepted), tuple(rejected), tuple(skipped))

    @staticmethod
    def generate_mask(x, x_tar, y_adv, object_grid, dist, cfg, oracle, ledger, seed):
        """Heatmap, then coarse and/or fine reduction according to cfg.mode."""
        grid = ImagingService.build_patch_grid(object_grid, cfg.patch_size, cfg.stride)
        snapshot = ledger.snapshot()

        heatmap = MaskGenService.heatmap(x, x_tar, y_adv, grid, dist, cfg, oracle, ledger, seed)
        coarse = fine = None

        if cfg.mode == FINE_ONLY:
            start, start_est = Mask.full(grid.object), heatmap.baseline_estimate
        else:
            coarse = MaskGenService.coarse_reduce(
                heatmap, grid, x, x_tar, y_adv, dist, cfg, oracle, ledger, seed,
            )
            start, start_est = coarse.mask, coarse.estimate
            if start_est.decision != EXACT:
                # early exit left only a bound; complete it on the coarse bill
                start_est = SurvivabilityService.estimate(
                    x, start, MaskGenService.target_delta(x, x_tar, grid.object),
                    y_adv, dist, cfg.n, oracle, ledger, seed, phase=COARSE,
                )

        if cfg.mode == COARSE_ONLY:
            mask, estimate = start, start_est
        else:
            fine = MaskGenService.fine_reduce(
                start, heatmap, grid, x, x_tar, y_adv, dist, cfg, oracle, ledger, seed, s0=start_est,
            )
            mask, estimate = fine.mask, fine.estimate

        queries = ledger.since(snapshot)
        logger.info(
            f'Mask generation ({cfg.mode}): ratio {mask.object_ratio():.3f}, '
            f'S={estimate.value:.3f}, queries {queries}'
        )
        return MaskGenerationResult(mask, estimate, heatmap, grid, coarse, fine, queries)

    @staticmethod
    def heatmap_grid(heatmap, grid):
        """Per-pixel mean impact of the covering patches, normalized to [0, 1]."""
        total = np.zeros(grid.object.shape)
        cover = np.zeros(grid.object.shape)
        for index, impact in heatmap.impacts():
            pixels = grid[index].pixels
            total[pixels] += impact
            cover[pixels] += 1
        values = np.divide(total, cover, out=np.zeros_like(total), where=cover > 0)
        values = np.clip(values, 0.0, None)
        peak = values.max()
        return values / peak if peak > 0 else values

    @staticmethod
    def heatmap_to_dict(heatmap, grid):
        return {
            'relative_to': heatmap.relative_to,
            'baseline': heatmap.baseline,
            'n': heatmap.baseline_estimate.n,
            'seed': heatmap.baseline_estimate.seed,
            'patch_size': grid.patch_size,
            'stride': grid.stride,
            'complete': heatmap.complete,
            'patches': [
                {
                    'index': index,
                    'anchor': list(grid[index].anchor),
                    'survivability': s,
                    'impact': heatmap.impact(index),
                }
                for index, s in heatmap.per_patch
            ],
        }
