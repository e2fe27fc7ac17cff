"""
Boost App - Services

Survivability maximization over a fixed mask with random gradient-free
(RGF) ascent:

    g_hat = 1/q * sum_i (S(M, delta + beta u_i) - S(M, delta)) / beta * u_i
    delta <- clip_feasible(delta + eta * g_hat)

u_i are unit-norm Gaussian directions supported on the mask. The base
estimate and its probes share one transform seed; each iteration draws
a fresh seed.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

from core.exceptions import BudgetExceededError, InvalidArgumentError
from imaging.domain import Perturbation
from imaging.services import ImagingService
from survivability.domain import LipschitzRecorder, LipschitzTrace, SurvivabilityEstimate
from survivability.services import SurvivabilityService
from . import checkpoints
from .domain import BoostResult, GradientEstimate, LineSearchOutcome

logger = logging.getLogger('patch_attack')

BOOST, LINE_SEARCH = 'boost', 'line_search'
DIRECTION_STREAM = 7


class BoostService:
    """Service class for perturbation boosting."""

    @staticmethod
    def iteration_seed(seed, iteration):
        """Transform seed of iteration k, derived from the run seed."""
        return int(np.random.SeedSequence([int(seed), int(iteration)]).generate_state(1)[0])

    @staticmethod
    def directions(m, channels, q, seed):
        """q unit-norm Gaussian directions, zero outside the mask."""
        support = np.broadcast_to(m.bits[:, :, np.newaxis], (m.height, m.width, channels))
        rng = np.random.default_rng([int(seed), DIRECTION_STREAM])
        result = []
        for _ in range(q):
            u = rng.standard_normal(support.shape) * support
            result.append(u / np.linalg.norm(u))
        return result

    @staticmethod
    def rgf_gradient(x, m, d, y_adv, dist, cfg, oracle, ledger, seed, base=None, trace=None):
        """
        Finite-difference gradient of S along q random directions.

        Spends n for the base estimate (unless ``base`` is given) plus q * n
        for the probes. An empty mask yields a zero gradient and no probes.
        """
        trace = trace if trace is not None else LipschitzRecorder()

        def survivability(delta):
            return SurvivabilityService.estimate(
                x, m, delta, y_adv, dist, cfg.n, oracle, ledger, seed, phase=BOOST, workers=1,
            )

        if base is None:
            base = survivability(d)
        if m.size() == 0:
            return GradientEstimate(np.zeros_like(d.delta), base, (), trace)

        directions = BoostService.directions(m, d.channels, cfg.q, seed)
        probes = [Perturbation(d.delta + cfg.beta * u) for u in directions]
        workers = settings.PATCH_ATTACK_WORKERS if cfg.workers is None else cfg.workers
        if workers > 1 and oracle.concurrent_safe:
            with ThreadPoolExecutor(max_workers=min(workers, cfg.q)) as pool:
                estimates = list(pool.map(survivability, probes))
        else:
            estimates = [survivability(p) for p in probes]

        g = np.zeros_like(d.delta)
        for u, est in zip(directions, estimates):
            g += (est.value - base.value) / cfg.beta * u
            trace = SurvivabilityService.lipschitz_record(trace, est.value, base.value, cfg.beta * u)
        g /= cfg.q
        return GradientEstimate(g, base, tuple(e.value for e in estimates), trace)

    @staticmethod
    def line_search_step(x, x_plane, m, d, g, base, y_adv, dist, cfg, oracle, ledger, seed):
        """
        Backtracking: try eta, eta/2, ... eta/2^k_max and take the first
        step whose estimate (same seed as base) is at least base.
        Falls back to the smallest trial.
        """
        outcome = None
        for k in range(cfg.k_max + 1):
            step = cfg.eta / 2 ** k
            candidate = ImagingService.feasible_delta(x_plane, m, d.delta + step * g)
            est = SurvivabilityService.estimate(
                x, m, candidate, y_adv, dist, cfg.n, oracle, ledger, seed, phase=LINE_SEARCH,
            )
            outcome = LineSearchOutcome(step, candidate, est, k + 1, est.value >= base.value)
            if outcome.improved:
                return outcome
        return outcome

    @staticmethod
    def boost(x, m, d0, y_adv, dist, cfg, oracle, ledger, initial=None,
              checkpoint_dir=None, resume=False, progress=None):
        """
        Ascend on S(M, delta) from d0 while an iteration fits in cfg.budget.

        Returns the delta with the highest estimate seen (earliest on ties).
        When the whole budget is below one estimate, d0 comes back with
        ``initial`` untouched, so the estimate is None unless the caller
        passed one; no query is spent either way.
        """
        if (d0.width, d0.height) != (m.width, m.height):
            raise InvalidArgumentError('Initial perturbation and mask must share a grid')
        started = time.monotonic()
        x_plane = ImagingService.to_plane(x, m.width, m.height)
        d0 = ImagingService.feasible_delta(x_plane, m, d0.delta)

        if cfg.budget < cfg.n:
            logger.info(f'Boost skipped: budget {cfg.budget} is below one estimate ({cfg.n})')
            return BoostResult(d0, initial, LipschitzTrace(), stopped='no-budget')

        spent_before = ledger.total
        state = BoostService._restore(checkpoint_dir, m) if resume and checkpoint_dir else None

        def spent():
            return ledger.total - spent_before + offset

        def estimate(delta, iteration):
            return SurvivabilityService.estimate(
                x, m, delta, y_adv, dist, cfg.n, oracle, ledger,
                BoostService.iteration_seed(cfg.seed, iteration), phase=BOOST,
            )

        if state is not None:
            current, current_est, best, best_est, trace, history, first, offset, cold_start = state
            logger.info(f'Boost resumed at iteration {first} ({offset} queries already spent)')
        else:
            offset, first, history, trace = 0, 0, [], LipschitzRecorder()
            current = best = d0
            current_est = best_est = estimate(d0, 0)
            cold_start = current_est.value == 0.0
            if cold_start:
                logger.warning('Boost cold start: initial survivability is 0, no label signal yet')

        iteration = first
        try:
            while spent() + cfg.iteration_cost <= cfg.budget:
                seed = BoostService.iteration_seed(cfg.seed, iteration)
                grad = BoostService.rgf_gradient(
                    x, m, current, y_adv, dist, cfg, oracle, ledger, seed, base=current_est, trace=trace,
                )
                trace = grad.trace
                if cfg.line_search:
                    step = BoostService.line_search_step(
                        x, x_plane, m, current, grad.g, current_est, y_adv, dist, cfg, oracle, ledger, seed,
                    ).step
                else:
                    step = cfg.eta
                current = ImagingService.feasible_delta(x_plane, m, current.delta + step * grad.g)
                iteration += 1
                current_est = estimate(current, iteration)
                if current_est.value > best_est.value:
                    best, best_est = current, current_est

                record = {
                    'iteration': iteration,
                    'queries': spent(),
                    'survivability': current_est.value,
                    'best': best_est.value,
                    'step': step,
                }
                history.append(record)
                if checkpoint_dir:
                    BoostService._checkpoint(
                        checkpoint_dir, current, current_est, best, best_est, trace,
                        history, iteration, spent(), cold_start, cfg,
                    )
                if progress is not None:
                    progress(record)
                logger.debug(
                    f'Boost iteration {iteration}: S={current_est.value:.3f} '
                    f'best={best_est.value:.3f} queries={spent()}'
                )
        except BudgetExceededError as e:
            e.partial = BoostResult(
                best, best_est, trace.freeze(), iteration, tuple(history), cold_start, spent(), 'ledger-budget',
            )
            raise

        logger.info(
            f'Boost finished after {iteration} iterations: best S={best_est.value:.3f}, '
            f'{spent()} queries, {time.monotonic() - started:.1f}s'
        )
        return BoostResult(best, best_est, trace.freeze(), iteration, tuple(history), cold_start, spent(), 'budget')

    @staticmethod
    def _checkpoint(directory, current, current_est, best, best_est, trace, history,
                    iteration, spent, cold_start, cfg):
        checkpoints.save(directory, current.delta, best.delta, {
            'iteration': iteration,
            'queries_spent': spent,
            'current': current_est.to_dict(),
            'best': best_est.to_dict(),
            'lipschitz': trace.to_list(),
            'history': history,
            'cold_start': cold_start,
            'config': cfg.to_dict(),
        })

    @staticmethod
    def _restore(directory, m):
        loaded = checkpoints.load(directory)
        if loaded is None:
            return None
        current, best, meta = loaded
        if current.shape[:2] != (m.height, m.width):
            raise InvalidArgumentError('Checkpoint perturbation does not match the mask grid')
        return (
            Perturbation(current),
            SurvivabilityEstimate.from_dict(meta['current']),
            Perturbation(best),
            SurvivabilityEstimate.from_dict(meta['best']),
            LipschitzRecorder(meta['lipschitz']),
            list(meta['history']),
            meta['iteration'],
            meta['queries_spent'],
            meta['cold_start'],
        )
