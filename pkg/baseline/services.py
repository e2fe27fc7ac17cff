"""
Baseline App - Services

Boundary-distance attack: search for the direction phi whose boundary
distance

    g(phi) = min { lambda > 0 : F(x + lambda * phi / ||phi||) = y_adv }

is smallest, descending on g with random gradient-free estimates. Run
against a WrappedOracle it becomes the survivability-thresholded
baseline, driven by a schedule that raises the threshold over epochs.
"""

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from django.conf import settings

from core.exceptions import BudgetExceededError, InitializationFailureError, InvalidArgumentError
from imaging.domain import Image
from imaging.services import ImagingService
from oracle.services import OracleService
from survivability.services import SurvivabilityService
from .domain import (
    COMPLETE, OUT_OF_BUDGET, UNREACHABLE,
    BoundaryBracket, DirectionState, OptAttackResult, ScheduleReport, WrappedOracle,
)

logger = logging.getLogger('patch_attack')

BASELINE = 'baseline'
EVALUATION = 'baseline_eval'
OUTER = 'wrapped_outer'
DIRECTION_STREAM = 11
EFFICIENCY_COLUMNS = ('algorithm', 'initial_threshold', 'final_robustness', 'queries')


def _unit(phi):
    norm = float(np.linalg.norm(phi))
    if not norm > 0:
        raise InvalidArgumentError('Direction must be non-zero')
    return phi / norm


class BaselineService:
    """Service class for the boundary-distance baseline."""

    @staticmethod
    def bracket(x, phi, y_adv, oracle, ledger, tol=1e-3, initial=None,
                check_origin=True, max_doublings=10, phase=BASELINE):
        """
        Bracket the boundary along phi to width < tol.

        Starts at ``initial`` (1.0 when unset), doubles outward until the
        label flips to y_adv, or halves inward while it holds. Without
        ``check_origin`` x itself is assumed non-adversarial.
        """
        if tol <= 0:
            raise InvalidArgumentError(f'tol must be > 0, got {tol}')
        unit = _unit(np.asarray(phi, dtype=np.float64))
        before = ledger.total

        def adversarial(lam):
            point = Image(np.clip(x.data + lam * unit, 0.0, 1.0))
            return OracleService.query(oracle, point, ledger, phase) == y_adv

        if check_origin and adversarial(0.0):
            return BoundaryBracket(0.0, 0.0, ledger.total - before)

        guess = initial if initial is not None and initial > 0 else 1.0
        if adversarial(guess):
            lo, hi = 0.0, guess
            probe = guess / 2
            while probe > tol:
                if not adversarial(probe):
                    lo = probe
                    break
                hi, probe = probe, probe / 2
        else:
            lo, hi = guess, 2 * guess
            doublings = 1
            while not adversarial(hi):
                if doublings >= max_doublings:
                    raise InitializationFailureError(
                        f'No adversarial scale found up to {hi:g} along the direction'
                    )
                lo, hi = hi, 2 * hi
                doublings += 1

        while hi - lo > tol:
            mid = (lo + hi) / 2
            if adversarial(mid):
                hi = mid
            else:
                lo = mid
        return BoundaryBracket(lo, hi, ledger.total - before)

    @staticmethod
    def boundary_distance(x, phi, y_adv, oracle, ledger, tol=1e-3, **kwargs):
        """g(phi): upper end of the boundary bracket along phi."""
        return BaselineService.bracket(x, phi, y_adv, oracle, ledger, tol, **kwargs).upper

    @staticmethod
    def initial_direction(x, x_tar, support=None):
        """phi0 = x_tar - x, projected onto the support when one is given."""
        if x.data.shape != x_tar.data.shape:
            raise InvalidArgumentError('Victim and target images must share a shape')
        phi = x_tar.data - x.data
        if support is not None:
            phi = phi * np.asarray(support, dtype=bool)[:, :, np.newaxis]
        if not np.any(phi):
            raise InitializationFailureError('Target example gives no direction inside the support')
        return phi

    @staticmethod
    def directions(shape, support, q, seed, index=0):
        """q unit Gaussian directions for epoch ``index``, projected onto the support."""
        rng = np.random.default_rng([int(seed), int(index), DIRECTION_STREAM])
        result = []
        for _ in range(q):
            u = rng.standard_normal(shape)
            if support is not None:
                u = u * support[:, :, np.newaxis]
            result.append(_unit(u))
        return result

    @staticmethod
    def initialize(x, x_tar, y_adv, oracle, cfg, ledger, support=None, phase=BASELINE):
        phi0 = BaselineService.initial_direction(x, x_tar, support)
        g0 = BaselineService.boundary_distance(
            x, phi0, y_adv, oracle, ledger, cfg.tol,
            initial=float(np.linalg.norm(phi0)), max_doublings=cfg.max_doublings, phase=phase,
        )
        return DirectionState(_unit(phi0), g0, ledger.total)

    @staticmethod
    def epoch(x, state, alpha, y_adv, oracle, cfg, ledger, index, support=None, phase=BASELINE):
        """
        One gradient step on g plus its line search.

        Returns (state, alpha, accepted). The step grows while it keeps
        improving and shrinks until it does; a step is accepted only if g
        strictly drops.
        """
        if state.g_val == 0.0:
            return state, alpha, False

        def g_at(phi):
            try:
                return BaselineService.boundary_distance(
                    x, phi, y_adv, oracle, ledger, cfg.tol, initial=state.g_val,
                    check_origin=False, max_doublings=cfg.max_doublings, phase=phase,
                )
            except InitializationFailureError:
                return None

        def project(phi):
            return phi if support is None else phi * support[:, :, np.newaxis]

        directions = BaselineService.directions(state.phi.shape, support, cfg.q, cfg.seed, index)
        probes = [state.phi + cfg.beta * u for u in directions]
        workers = settings.PATCH_ATTACK_WORKERS if cfg.workers is None else cfg.workers
        if workers > 1 and oracle.concurrent_safe:
            with ThreadPoolExecutor(max_workers=min(workers, cfg.q)) as pool:
                values = list(pool.map(g_at, probes))
        else:
            values = [g_at(p) for p in probes]

        grad = np.zeros_like(state.phi)
        for u, value in zip(directions, values):
            # probes that never flip carry no usable difference
            if value is not None:
                grad += (value - state.g_val) / cfg.beta * u
        grad /= cfg.q
        if not np.any(grad):
            return state, alpha, False

        def trial(step):
            phi = _unit(project(state.phi - step * grad))
            return phi, g_at(phi)

        def better(value, than):
            return value is not None and value < than

        step = alpha
        phi, value = trial(step)
        if better(value, state.g_val):
            for _ in range(cfg.k_max):
                bigger_phi, bigger_value = trial(2 * step)
                if not better(bigger_value, value):
                    break
                step, phi, value = 2 * step, bigger_phi, bigger_value
        else:
            for _ in range(cfg.k_max):
                step /= 2
                phi, value = trial(step)
                if better(value, state.g_val):
                    break

        if better(value, state.g_val):
            return DirectionState(phi, value, ledger.total), step, True
        return DirectionState(state.phi, state.g_val, ledger.total), step, False

    @staticmethod
    def opt_attack(x, x_tar, y_adv, oracle, cfg, ledger, support=None, phase=BASELINE):
        """
        Minimize g(phi) from phi0 = x_tar - x.

        Descent epochs start while fewer than cfg.budget queries went into
        descent; the last epoch may run past it. Returns the final boundary
        point x + g(phi) * phi / ||phi||.
        """
        support = None if support is None else np.asarray(support, dtype=bool)
        state = BaselineService.initialize(x, x_tar, y_adv, oracle, cfg, ledger, support, phase)
        started = ledger.total
        alpha, epochs, history = cfg.alpha, 0, [state.g_val]
        logger.info(f'Boundary-distance attack initialized: g={state.g_val:.4f}')
        try:
            while ledger.total - started < cfg.budget and state.g_val > 0:
                state, alpha, accepted = BaselineService.epoch(
                    x, state, alpha, y_adv, oracle, cfg, ledger, epochs, support, phase,
                )
                epochs += 1
                if accepted:
                    history.append(state.g_val)
        except BudgetExceededError as e:
            e.partial = OptAttackResult(Image(state.boundary_point(x)), state, tuple(history), epochs, alpha)
            raise
        logger.info(f'Boundary-distance attack done: g={state.g_val:.4f} after {epochs} epochs')
        return OptAttackResult(Image(state.boundary_point(x)), state, tuple(history), epochs, alpha)

    @staticmethod
    def threshold_schedule_run(x, x_tar, y_adv, mask, dist, start_threshold, cfg, oracle, ledger):
        """
        Boundary-distance attack against F' with a rising threshold.

        Thresholds are integer percents. Every cfg.epochs_per_raise epochs
        the threshold rises by cfg.threshold_step and the attack
        re-initializes against the re-wrapped oracle; if no adversarial
        reference survives the new threshold the run stops as
        threshold-unreachable. The run completes after a full level at 100.
        """
        if not 0 <= start_threshold <= 100 or int(start_threshold) != start_threshold:
            raise InvalidArgumentError(f'start threshold must be an integer percent, got {start_threshold}')
        support = ImagingService.resample_grid_nearest(mask.bits, x.width, x.height)
        object_grid = SurvivabilityService.scene_object(mask, x)
        threshold = int(start_threshold)
        wrapped = WrappedOracle(oracle, dist, cfg.n, threshold / 100, object_grid,
                                seed=cfg.seed, phase=BASELINE, target=y_adv)
        started = ledger.total
        levels, epoch, failed = [], 0, None

        try:
            state = BaselineService.initialize(x, x_tar, y_adv, wrapped, cfg, ledger, support, phase=OUTER)
        except InitializationFailureError:
            logger.warning(f'Threshold schedule cannot initialize at {threshold}%')
            return ScheduleReport(
                threshold, (), UNREACHABLE, threshold, 0.0, ledger.total - started, 0, threshold,
            )

        alpha, status = cfg.alpha, COMPLETE
        level_start = started
        while True:
            level = {'threshold': threshold, 'first_epoch': epoch}
            for _ in range(cfg.epochs_per_raise):
                if ledger.total - started >= cfg.budget:
                    status = OUT_OF_BUDGET
                    break
                state, alpha, _ = BaselineService.epoch(
                    x, state, alpha, y_adv, wrapped, cfg, ledger, epoch, support, OUTER,
                )
                epoch += 1
            level['queries'] = ledger.total - level_start
            levels.append(level)
            if status == OUT_OF_BUDGET or threshold >= 100:
                break

            threshold = min(100, threshold + cfg.threshold_step)
            wrapped = wrapped.rewrapped(threshold / 100)
            level_start = ledger.total
            reinitialized = BaselineService._reinitialize(x, x_tar, y_adv, wrapped, cfg, ledger, support, state)
            if reinitialized is None:
                status, failed = UNREACHABLE, threshold
                threshold = levels[-1]['threshold']
                logger.warning(f'Threshold schedule unreachable at {failed}% after {epoch} epochs')
                break
            state = reinitialized
            logger.info(f'Threshold raised to {threshold}% at epoch {epoch}: g={state.g_val:.4f}')

        queries = ledger.total - started
        point = Image(state.boundary_point(x))
        robustness = SurvivabilityService.estimate_image(
            point, object_grid, y_adv, dist, cfg.n, oracle, ledger, cfg.seed + 1, phase=EVALUATION,
        ).value
        return ScheduleReport(
            int(start_threshold), tuple(levels), status, threshold, robustness, queries, epoch, failed,
        )

    @staticmethod
    def _reinitialize(x, x_tar, y_adv, wrapped, cfg, ledger, support, state):
        """Boundary along the current direction, else along x_tar - x; None if neither flips."""
        phi0 = BaselineService.initial_direction(x, x_tar, support)
        candidates = ((state.phi, state.g_val or None), (phi0, float(np.linalg.norm(phi0))))
        for phi, initial in candidates:
            try:
                g = BaselineService.boundary_distance(
                    x, phi, y_adv, wrapped, ledger, cfg.tol, initial=initial,
                    max_doublings=cfg.max_doublings, phase=OUTER,
                )
            except InitializationFailureError:
                continue
            return DirectionState(_unit(phi), g, ledger.total)
        return None

    @staticmethod
    def efficiency_rows(reports, attack_row=None):
        """Efficiency comparison rows; ``attack_row`` is the main attack's own row."""
        rows = [{
            'algorithm': 'threshold-schedule',
            'initial_threshold': r.start_threshold,
            'final_robustness': r.final_robustness,
            'queries': r.queries,
        } for r in reports]
        if attack_row is not None:
            rows.append({column: attack_row.get(column) for column in EFFICIENCY_COLUMNS})
        return rows

    @staticmethod
    def write_efficiency_table(rows, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / 'efficiency.csv', 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(EFFICIENCY_COLUMNS)
            for row in rows:
                writer.writerow([row[column] for column in EFFICIENCY_COLUMNS])
        (directory / 'efficiency.json').write_text(json.dumps(rows, indent=2))
        logger.info(f'Efficiency table written to {directory}')
