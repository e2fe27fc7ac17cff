"""
Survivability App - Services

Monte-Carlo survivability estimation, sampling-error bounds and local
Lipschitz tracking.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, wait

import numpy as np
from django.conf import settings

from core.exceptions import BudgetExceededError, InvalidArgumentError
from core.plotting import save_histogram
from imaging.services import ImagingService
from oracle.services import OracleService
from transforms.services import TransformService
from .domain import ABOVE, BELOW, EXACT, PARTIAL, LipschitzRecorder, SurvivabilityEstimate

logger = logging.getLogger('patch_attack')

LIPSCHITZ_BIN_WIDTH = 0.005


class SurvivabilityService:
    """Service class for survivability estimation."""

    @staticmethod
    def scene_object(m, x):
        """The mask's object region at the scene resolution of x."""
        return ImagingService.resample_grid_nearest(m.object, x.width, x.height)

    @staticmethod
    def estimate(x, m, d, y_adv, dist, n, oracle, ledger, seed,
                 phase='estimate', threshold=None, workers=None):
        """
        S(M, delta): fraction of the seeded transforms t_1..t_n under which
        F(t(x + M * delta)) = y_adv.

        Identical seeds use identical transforms. With ``threshold`` set,
        stops as soon as the full-n value is known to be on one side of it.
        """
        adversarial = ImagingService.apply_perturbation(x, m, d)
        return SurvivabilityService.estimate_image(
            adversarial, SurvivabilityService.scene_object(m, x), y_adv, dist, n,
            oracle, ledger, seed, phase=phase, threshold=threshold, workers=workers,
        )

    @staticmethod
    def estimate_image(img, object_grid, y_adv, dist, n, oracle, ledger, seed,
                       phase='estimate', threshold=None, workers=None):
        """Survivability of an already-perturbed scene image."""
        if n < 1:
            raise InvalidArgumentError(f'n must be >= 1, got {n}')
        if threshold is not None and not 0.0 <= threshold <= 1.0:
            raise InvalidArgumentError(f'threshold must be in [0, 1], got {threshold}')
        transforms = TransformService.sample_sequence(dist, seed, n, object_grid)
        workers = settings.PATCH_ATTACK_WORKERS if workers is None else workers

        def classify(params):
            view = TransformService.apply(params, img, object_grid)
            return OracleService.query(oracle, view, ledger, phase) == y_adv

        if threshold is None and workers > 1 and oracle.concurrent_safe:
            return SurvivabilityService._estimate_parallel(classify, transforms, n, seed, workers)

        hits = 0
        for spent, params in enumerate(transforms, start=1):
            try:
                hits += classify(params)
            except BudgetExceededError as e:
                e.partial = SurvivabilityService._partial(hits, spent - 1, n, seed)
                raise
            if threshold is not None and spent < n:
                if hits / n >= threshold:
                    return SurvivabilityEstimate(hits / spent, n, seed, spent, hits, ABOVE)
                if (hits + n - spent) / n < threshold:
                    return SurvivabilityEstimate(hits / spent, n, seed, spent, hits, BELOW)
        return SurvivabilityEstimate(hits / n, n, seed, n, hits, EXACT)

    @staticmethod
    def _estimate_parallel(classify, transforms, n, seed, workers):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(classify, params) for params in transforms]
            wait(futures)
        outcomes = []
        for future in futures:
            error = future.exception()
            outcomes.append(error if error is not None else future.result())
        failure = next((o for o in outcomes if isinstance(o, BaseException)), None)
        if failure is None:
            hits = sum(outcomes)
            return SurvivabilityEstimate(hits / n, n, seed, n, hits, EXACT)
        done = [o for o in outcomes if not isinstance(o, BaseException)]
        if isinstance(failure, BudgetExceededError):
            failure.partial = SurvivabilityService._partial(sum(done), len(done), n, seed)
        raise failure

    @staticmethod
    def _partial(hits, spent, n, seed):
        return SurvivabilityEstimate(hits / spent if spent else 0.0, n, seed, spent, hits, PARTIAL)

    @staticmethod
    def chernoff_bound(n, q, eps):
        """
        Sampling-error bound in its published form, 2 exp(-n q^3 / (3 eps^2)),
        clamped to [0, 1].
        """
        SurvivabilityService._check_bound_args(n, q, eps)
        return min(1.0, 2.0 * math.exp(-n * q ** 3 / (3.0 * eps ** 2)))

    @staticmethod
    def chernoff_bound_derived(n, q, eps):
        """
        Multiplicative Chernoff bound with relative error eps / q,
        2 exp(-n eps^2 / (3 q)), clamped to [0, 1].
        """
        SurvivabilityService._check_bound_args(n, q, eps)
        return min(1.0, 2.0 * math.exp(-n * eps ** 2 / (3.0 * q)))

    @staticmethod
    def _check_bound_args(n, q, eps):
        if n < 0:
            raise InvalidArgumentError(f'n must be non-negative, got {n}')
        if not 0.0 < q <= 1.0:
            raise InvalidArgumentError(f'q must be in (0, 1], got {q}')
        if eps <= 0:
            raise InvalidArgumentError(f'eps must be positive, got {eps}')

    @staticmethod
    def lipschitz_record(trace, s_new, s_base, step):
        """
        Append |s_new - s_base| / ||step||_2.

        A LipschitzRecorder grows in place and is returned; a frozen
        LipschitzTrace is first copied into a new recorder.
        """
        norm = float(np.linalg.norm(np.asarray(step, dtype=np.float64)))
        if not norm > 0:
            raise InvalidArgumentError('Lipschitz step must have positive norm')
        recorder = trace if isinstance(trace, LipschitzRecorder) else LipschitzRecorder(trace.samples)
        recorder.append(abs(s_new - s_base) / norm)
        return recorder

    @staticmethod
    def lipschitz_histogram(trace, bin_width=LIPSCHITZ_BIN_WIDTH):
        """(counts, edges) of the trace at a fixed bin width starting at 0."""
        top = max(trace.max, bin_width)
        bins = int(math.ceil(top / bin_width))
        # one more bin when the maximum falls exactly on an edge
        if bins * bin_width <= trace.max:
            bins += 1
        edges = np.arange(bins + 1) * bin_width
        counts, _ = np.histogram(np.asarray(trace.samples), bins=edges)
        return counts, edges

    @staticmethod
    def save_lipschitz_histogram(trace, path, bin_width=LIPSCHITZ_BIN_WIDTH):
        counts, edges = SurvivabilityService.lipschitz_histogram(trace, bin_width)
        logger.info(f'Lipschitz max {trace.max:.4f} over {len(trace)} samples')
        return save_histogram(
            counts, edges, path, xlabel='local Lipschitz ratio',
            title=f'max {trace.max:.4f} (n={len(trace)})',
        )
