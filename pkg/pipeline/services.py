"""
Pipeline App - Services

Orchestration of whole attacks: mask generation followed by boosting
(optionally over several rounds), held-out evaluation, budget sweeps,
reduction ablations and the thresholded baseline, plus persistence of
everything a run produced.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.conf import settings
from scipy import ndimage

from baseline.services import BaselineService
from boost.domain import BoostResult
from boost.services import BoostService
from core.exceptions import BudgetExceededError, InvalidArgumentError
from core.plotting import save_curve
from imaging import files
from imaging.domain import Mask, Perturbation
from imaging.services import ImagingService
from maskgen.domain import MODES, TARGET
from maskgen.services import MaskGenService
from oracle.domain import QueryLedger
from oracle.services import OracleService
from survivability.domain import LipschitzTrace
from survivability.services import SurvivabilityService
from transforms.services import TransformService
from . import reports
from .domain import (
    COLD_START, COMPLETE, NO_BOOST_GAIN, PARTIAL, AttackReport, Round,
)
from .models import AttackRun

logger = logging.getLogger('patch_attack')

HELDOUT = 'heldout'
DEFAULT_BUDGETS = tuple(range(25000, 200001, 25000))
SWEEP_COLUMNS = ('budget', 'heldout_survivability', 'queries', 'iterations')
ABLATION_COLUMNS = ('mode', 'survivability', 'pixel_count', 'queries', 'runtime_seconds')


def border_region(object_grid, width):
    """Pixels of the object within ``width`` pixels of its outline (or the frame)."""
    obj = np.asarray(object_grid, dtype=bool)
    interior = ndimage.binary_erosion(obj, iterations=width, border_value=0)
    return obj & ~interior


def derive_seeds(seed, round_index=0):
    """Independent maskgen, boost and held-out seeds for one round."""
    state = np.random.SeedSequence([int(seed), int(round_index)]).generate_state(3)
    maskgen, boost, heldout = (int(v) for v in state)
    return {'master': int(seed), 'round': int(round_index), 'maskgen': maskgen, 'boost': boost, 'heldout': heldout}


class PipelineService:
    """Service class for whole-attack orchestration."""

    @staticmethod
    def run_attack(instance, mcfg, bcfg, dist, oracle, seed=0, **kwargs):
        """Mask generation then boosting: a one-round iterative run."""
        return PipelineService.run_iterative(
            instance, [Round(mcfg.patch_size)], mcfg, bcfg, dist, oracle, seed=seed, **kwargs,
        )

    @staticmethod
    def run_iterative(instance, rounds, mcfg, bcfg, dist, oracle, seed=0, ledger=None,
                      out_dir=None, config_hash='', heldout_n=None, resume=False):
        """
        Alternate mask generation and boosting, feeding each round's
        boosted image into the next. Pinned rounds skip mask generation.

        The report's mask is the union of the round masks and its
        perturbation the sum of the round perturbations on the plane.
        On budget exhaustion the best state so far is reported as partial.
        """
        if not rounds:
            raise InvalidArgumentError('An iterative run needs at least one round')
        started = time.monotonic()
        ledger = ledger if ledger is not None else QueryLedger()
        heldout_n = settings.PATCH_ATTACK_HELDOUT_TRANSFORMS if heldout_n is None else heldout_n
        out_dir = Path(out_dir) if out_dir else None

        x, x_tar, y_adv = instance.victim, instance.target_example, instance.target_label
        plane_object = instance.plane_object()
        width, height = instance.perturb_resolution

        current = x
        union = Mask.empty(plane_object)
        total_delta = Perturbation.zeros(width, height, x.channels)
        first_post_mask = first_heatmap = None
        attack_estimate = None
        trace, round_records, boost_summary = [], [], {}
        lipschitz = LipschitzTrace()
        status, flags = COMPLETE, set()

        for r, rnd in enumerate(rounds):
            seeds = derive_seeds(seed, r)
            snapshot = ledger.snapshot()
            record = {'round': r, 'policy': rnd.policy, 'patch_size': rnd.patch_size, 'seeds': seeds}
            mask = result = mask_estimate = None
            try:
                if rnd.pinned:
                    mask = Mask(border_region(plane_object, rnd.border_width), plane_object)
                else:
                    result = MaskGenService.generate_mask(
                        current, x_tar, y_adv, plane_object, dist,
                        replace(mcfg, patch_size=rnd.patch_size), oracle, ledger, seeds['maskgen'],
                    )
                    mask, mask_estimate = result.mask, result.estimate
                    trace.extend(PipelineService._maskgen_trace(r, result))
                    if first_heatmap is None:
                        first_heatmap = (result.heatmap, result.grid)

                d0 = MaskGenService.target_delta(current, x_tar, plane_object).gated(mask)
                post_mask = ImagingService.apply_perturbation(current, mask, d0)
                if first_post_mask is None:
                    first_post_mask = post_mask

                checkpoint_dir = out_dir / 'checkpoints' / f'round-{r}' if out_dir else None
                boosted = BoostService.boost(
                    current, mask, d0, y_adv, dist, replace(bcfg, seed=seeds['boost']), oracle, ledger,
                    initial=mask_estimate, checkpoint_dir=checkpoint_dir, resume=resume,
                )
            except BudgetExceededError as e:
                status = PARTIAL
                boosted = e.partial if isinstance(e.partial, BoostResult) else None
                logger.warning(f'Query budget exhausted in round {r}: {e}')
                if mask is None or boosted is None:
                    record['queries'] = ledger.since(snapshot)
                    record['stopped'] = 'ledger-budget'
                    round_records.append(record)
                    break

            current = ImagingService.apply_perturbation(current, mask, boosted.delta)
            union = Mask(union.bits | mask.bits, plane_object)
            total_delta = Perturbation(total_delta.delta + boosted.delta.delta)
            lipschitz = lipschitz.extend(boosted.lipschitz)
            if boosted.cold_start:
                flags.add(COLD_START)
            if boosted.estimate is not None:
                attack_estimate = boosted.estimate
            boost_summary = {
                'iterations': boosted.iterations,
                'queries': boosted.queries_spent,
                'stopped': boosted.stopped,
                'cold_start': boosted.cold_start,
                'lipschitz_max': boosted.lipschitz.max,
                'history': list(boosted.history),
            }
            trace.extend({'stage': 'boost', 'round': r, **h} for h in boosted.history)
            record.update({
                'mask_pixels': mask.size(),
                'mask_estimate': mask_estimate.value if mask_estimate is not None else None,
                'boost_estimate': boosted.estimate.value if boosted.estimate is not None else None,
                'boost_iterations': boosted.iterations,
                'stopped': boosted.stopped,
                'queries': ledger.since(snapshot),
            })
            round_records.append(record)
            if status == PARTIAL:
                break

        evaluation = QueryLedger()
        heldout_seed = derive_seeds(seed)['heldout']
        scene_object = instance.object

        def heldout(img):
            return SurvivabilityService.estimate_image(
                img, scene_object, y_adv, dist, heldout_n, oracle, evaluation, heldout_seed, phase=HELDOUT,
            ).value

        post_mask_s = heldout(first_post_mask) if first_post_mask is not None else None
        final_s = heldout(current)
        if post_mask_s is not None and final_s <= post_mask_s:
            flags.add(NO_BOOST_GAIN)

        survivability = {
            'attack': attack_estimate.value if attack_estimate is not None else None,
            'attack_n': attack_estimate.n if attack_estimate is not None else None,
            'post_mask_heldout': post_mask_s,
            'heldout': final_s,
            'heldout_n': heldout_n,
        }
        trace.append({'stage': 'ledger', **ledger.to_dict()})
        report = AttackReport(
            status=status,
            mask=union,
            perturbation=total_delta,
            survivability=survivability,
            ledger=ledger.to_dict(),
            evaluation=evaluation.to_dict(),
            config_hash=config_hash,
            seeds={'master': int(seed), 'heldout': heldout_seed},
            flags=tuple(sorted(flags)),
            boost={**boost_summary, 'lipschitz_max': lipschitz.max, 'lipschitz_samples': len(lipschitz)},
            rounds=tuple(round_records),
            wall_clock=round(time.monotonic() - started, 3),
        )
        logger.info(
            f'Attack {status}: held-out S={final_s:.3f} (post-mask {post_mask_s}), '
            f'mask ratio {union.object_ratio():.3f}, {ledger.total} queries'
        )

        if out_dir:
            PipelineService._persist(
                out_dir, report, current, first_post_mask, first_heatmap, trace, lipschitz,
                dist, heldout_seed, heldout_n, scene_object,
            )
        return report

    @staticmethod
    def _maskgen_trace(r, result):
        records = [
            {'stage': 'heatmap', 'round': r, 'patch': index, 'survivability': s}
            for index, s in result.heatmap.per_patch
        ]
        if result.coarse is not None:
            records.append({
                'stage': 'coarse', 'round': r, 'pivot': result.coarse.pivot,
                'survivability': result.coarse.estimate.value,
                'reached_s_hi': result.coarse.reached_s_hi, 'evaluations': result.coarse.evaluations,
            })
        if result.fine is not None:
            records.append({
                'stage': 'fine', 'round': r, 'j_trace': list(result.fine.j_trace),
                'accepted': list(result.fine.accepted), 'rejected': list(result.fine.rejected),
            })
        records.append({'stage': 'maskgen', 'round': r, 'queries': result.queries,
                        'mask_pixels': result.mask.size()})
        return records

    @staticmethod
    def _persist(out_dir, report, adversarial, post_mask, heatmap, trace, lipschitz,
                 dist, heldout_seed, heldout_n, scene_object):
        reports.save_report(report, out_dir)
        reports.save_images(out_dir, adversarial, post_mask, report.mask)
        if heatmap is not None:
            hm, grid = heatmap
            files.save_grayscale(MaskGenService.heatmap_grid(hm, grid), out_dir / 'heatmap.png')
            (out_dir / 'heatmap.json').write_text(
                reports.dumps(MaskGenService.heatmap_to_dict(hm, grid), indent=2) + '\n', encoding='utf-8',
            )
        reports.write_trace(trace, out_dir / reports.TRACE)
        SurvivabilityService.save_lipschitz_histogram(lipschitz, out_dir / 'lipschitz.png')
        TransformService.export_trace(
            TransformService.sample_sequence(dist, heldout_seed, heldout_n, scene_object),
            out_dir / 'transforms.ndjson', dist,
        )
        logger.info(f'Report written to {out_dir}')

    @staticmethod
    def run_heatmap(instance, mcfg, dist, oracle, seed=0, relative_to=TARGET, out_dir=None, ledger=None):
        """Heatmap stage alone, persisted as heatmap.png and heatmap.json."""
        ledger = ledger if ledger is not None else QueryLedger()
        plane_object = instance.plane_object()
        grid = ImagingService.build_patch_grid(plane_object, mcfg.patch_size, mcfg.stride)
        result = MaskGenService.heatmap(
            instance.victim, instance.target_example, instance.target_label, grid, dist, mcfg,
            oracle, ledger, derive_seeds(seed)['maskgen'], relative_to=relative_to,
        )
        if out_dir:
            out_dir = Path(out_dir)
            files.save_grayscale(MaskGenService.heatmap_grid(result, grid), out_dir / 'heatmap.png')
            (out_dir / 'heatmap.json').write_text(
                reports.dumps(MaskGenService.heatmap_to_dict(result, grid), indent=2) + '\n',
                encoding='utf-8',
            )
        return result, grid

    @staticmethod
    def run_budget_sweep(instance, budgets, mcfg, bcfg, dist, oracle, seed=0, out_dir=None,
                         heldout_n=None, config_hash='', processes=1, oracle_spec=None):
        """
        Independent attacks at each boost budget, shared seed.

        With processes > 1 every budget runs in its own process, each
        building its oracle from ``oracle_spec`` and owning its
        subdirectory. Returns (rows, reports).
        """
        budgets = list(budgets or DEFAULT_BUDGETS)
        if budgets != sorted(budgets):
            raise InvalidArgumentError(f'Budgets must be sorted ascending, got {budgets}')
        out_dir = Path(out_dir) if out_dir else None
        jobs = [
            (instance, mcfg, replace(bcfg, budget=b), dist, seed,
             out_dir / f'budget-{b}' if out_dir else None, heldout_n, config_hash)
            for b in budgets
        ]
        if processes > 1:
            if oracle_spec is None:
                raise InvalidArgumentError('Parallel sweeps need an oracle spec to rebuild the oracle per process')
            with ProcessPoolExecutor(max_workers=processes) as pool:
                results = list(pool.map(_sweep_job, [(oracle_spec, *job) for job in jobs]))
        else:
            results = [_run_sweep_job(oracle, *job) for job in jobs]

        rows = [{
            'budget': b,
            'heldout_survivability': report.heldout,
            'queries': report.ledger['total'],
            'iterations': report.boost.get('iterations', 0),
        } for b, report in zip(budgets, results)]
        if out_dir:
            reports.write_table(rows, SWEEP_COLUMNS, out_dir, 'sweep')
            save_curve(
                [r['budget'] for r in rows], [r['heldout_survivability'] for r in rows],
                out_dir / 'sweep.png', xlabel='boost query budget', ylabel='held-out survivability',
            )
        return rows, results

    @staticmethod
    def run_ablation(instance, mcfg, dist, oracle, seed=0, modes=MODES, out_dir=None):
        """Mask generation in each reduction mode, one fresh ledger per mode."""
        rows, results = [], {}
        plane_object = instance.plane_object()
        for mode in modes:
            ledger = QueryLedger()
            started = time.monotonic()
            result = MaskGenService.generate_mask(
                instance.victim, instance.target_example, instance.target_label, plane_object,
                dist, replace(mcfg, mode=mode), oracle, ledger, derive_seeds(seed)['maskgen'],
            )
            results[mode] = (result, ledger)
            rows.append({
                'mode': mode,
                'survivability': result.estimate.value,
                'pixel_count': result.mask.size(),
                'queries': ledger.total,
                'runtime_seconds': round(time.monotonic() - started, 3),
            })
            logger.info(f'Ablation {mode}: {result.mask.size()} px, {ledger.total} queries')
        if out_dir:
            reports.write_table(rows, ABLATION_COLUMNS, out_dir, 'ablation')
        return rows, results

    @staticmethod
    def run_baseline(instance, start_thresholds, cfg, dist, oracle, mask=None, ledger=None,
                     attack_row=None, out_dir=None):
        """Threshold-schedule runs at each start threshold, plus the efficiency table."""
        plane_object = instance.plane_object()
        mask = mask if mask is not None else Mask.full(plane_object)
        schedule_reports = []
        for start in start_thresholds:
            run_ledger = ledger if ledger is not None else QueryLedger()
            schedule_reports.append(BaselineService.threshold_schedule_run(
                instance.victim, instance.target_example, instance.target_label, mask, dist,
                start, cfg, oracle, run_ledger,
            ))
        rows = BaselineService.efficiency_rows(schedule_reports, attack_row)
        if out_dir:
            out_dir = Path(out_dir)
            BaselineService.write_efficiency_table(rows, out_dir)
            reports.write_trace([r.to_dict() for r in schedule_reports], out_dir / 'schedule.ndjson')
        return rows, schedule_reports


def _run_sweep_job(oracle, instance, mcfg, bcfg, dist, seed, out_dir, heldout_n, config_hash):
    return PipelineService.run_attack(
        instance, mcfg, bcfg, dist, oracle, seed=seed, out_dir=out_dir,
        heldout_n=heldout_n, config_hash=config_hash,
    )


def _sweep_job(args):
    oracle_spec, *job = args
    oracle = OracleService.build_oracle(oracle_spec)
    try:
        return _run_sweep_job(oracle, *job)
    finally:
        oracle.close()


class RunRegistryService:
    """Service class for the run registry."""

    @staticmethod
    def record(command, report=None, run_dir='', seed=0, config_hash='', status=None, queries=None):
        """Record one finished run; the report supplies what it can."""
        if report is not None:
            status = status or report.status
            queries = report.ledger['total'] if queries is None else queries
            config_hash = config_hash or report.config_hash
        run = AttackRun.objects.create(
            command=command,
            status=status or COMPLETE,
            config_hash=config_hash,
            seed=seed,
            total_queries=queries or 0,
            heldout_survivability=report.heldout if report is not None else None,
            mask_ratio=report.mask_to_object_ratio if report is not None else None,
            run_dir=str(run_dir),
        )
        logger.info(f'Registered run {run.pk}: {command} {run.status}')
        return run

    @staticmethod
    def recent(limit=20):
        return list(AttackRun.objects.all()[:limit])
