"""The experiment suites run by the command-line driver."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..discretization import TargetData
from ..errors import ConfigurationError, SolverBreakdown
from ..hessian import ControlParams
from ..krylov import recovery_errors, solve_control
from ..preconditioner import LevelCache, build_preconditioner
from ..spectral import spectrum_table
from ..targets import pressure_target, velocity_target
from ..validation import (control_richardson, lemma_check, operator_checks,
                          stokes_convergence, zero_target_check)
from .config import ExperimentKind

log = logging.getLogger(__name__)

# per-cell failures the driver records instead of aborting the run
CELL_ERRORS = (ConfigurationError, SolverBreakdown, MemoryError)


@dataclass
class ExperimentResult:
    kind: str
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def _param_rows(config):
    for block in config.blocks:
        for beta in block.betas:
            yield ControlParams(beta, block.gamma_u, block.gamma_p)


def _params_dict(params):
    return {"beta": params.beta, "gamma_u": params.gamma_u,
            "gamma_p": params.gamma_p}


def _cache(config):
    return LevelCache(config.strategy, config.control_space)


def _targets(fe):
    return TargetData.project(fe, velocity_target, pressure_target)


def _fail(result, row, exc):
    row.update(result="error", status=f"{type(exc).__name__}: {exc}")
    result.failures.append(row["status"])
    log.warning("cell failed: %s", row["status"])


# ---------------------------------------------------------------------------

def run_spectrum(config):
    result = ExperimentResult(ExperimentKind.SPECTRUM.value)
    cache = _cache(config)
    for params in _param_rows(config):
        try:
            reports = spectrum_table(config.levels, params, cache,
                                     outliers=config.outliers)
        except CELL_ERRORS as exc:
            row = {"level": None, **_params_dict(params)}
            _fail(result, row, exc)
            result.rows.append(row)
            continue
        for rep in reports:
            row = rep.as_row()
            row["eigenvalues"] = rep.eigenvalues
            result.rows.append(row)
    return result


def _solve_cell(config, cache, level, num, params, targets):
    row = {"level": level, "h": 2.0 ** -level, "num_levels": num,
           **_params_dict(params), "strategy": config.strategy,
           "tol": config.tol}
    max_iter = config.max_iter if num > 1 else config.max_iter_unpreconditioned
    row["max_iter"] = max_iter
    t0 = time.perf_counter()
    pc = build_preconditioner(level, num, params, cache)
    setup = time.perf_counter() - t0
    pc.reset_counts()
    rep = solve_control(pc.finest_hessian, targets, pc, tol=config.tol,
                        max_iter=max_iter)
    counts = rep.counts["preconditioner"]
    row.update(
        iterations=rep.iterations, converged=rep.converged,
        result=str(rep.iterations) if rep.converged else "nc",
        status=rep.status, final_residual=rep.final_residual,
        fine_stokes_solves=rep.counts["fine_stokes_solves"],
        total_stokes_solves=sum(lv["stokes_solves"]
                                for lv in counts["levels"]),
        base_solves=counts["base_solves"])
    return row, rep, setup


def run_solve(config, timing=False):
    kind = ExperimentKind.TIMING if timing else ExperimentKind.SOLVE
    result = ExperimentResult(kind.value)
    cache = _cache(config)
    for level in config.levels:
        targets = _targets(cache.fe(level))
        for params in _param_rows(config):
            for num in config.num_levels:
                try:
                    row, rep, setup = _solve_cell(config, cache, level, num,
                                                  params, targets)
                except CELL_ERRORS as exc:
                    row = {"level": level, "num_levels": num,
                           **_params_dict(params)}
                    _fail(result, row, exc)
                    result.rows.append(row)
                    continue
                if timing:
                    row["setup_time"] = setup
                    row["solve_time"] = rep.wall_time
                else:
                    row["residual_history"] = rep.residual_history
                log.info("h=2^-%d levels=%d beta=%g: %s", level, num,
                         params.beta, row["result"])
                result.rows.append(row)
    return result


def run_timing(config):
    """Wall time and Stokes-solve counts; the base-case setup time is separate."""
    return run_solve(config, timing=True)


def run_recovery(config):
    result = ExperimentResult(ExperimentKind.RECOVERY.value)
    cache = _cache(config)
    num = config.num_levels[-1]
    for level in config.levels:
        targets = _targets(cache.fe(level))
        for params in _param_rows(config):
            row = {"level": level, "h": 2.0 ** -level, "num_levels": num,
                   **_params_dict(params), "strategy": config.strategy}
            try:
                pc = build_preconditioner(level, num, params, cache)
                rep = solve_control(pc.finest_hessian, targets, pc,
                                    tol=config.tol,
                                    max_iter=config.max_iter_unpreconditioned)
                e_u, e_p = recovery_errors(cache.system(level), rep.f_min,
                                           targets)
            except CELL_ERRORS as exc:
                _fail(result, row, exc)
                result.rows.append(row)
                continue
            row.update(E_u=e_u, E_p=e_p, iterations=rep.iterations,
                       converged=rep.converged)
            result.rows.append(row)
    return result


def run_validate(config):
    """Manufactured Stokes rates, control Richardson orders and invariants."""
    result = ExperimentResult(ExperimentKind.VALIDATE.value)
    cache = _cache(config)
    levels = sorted(config.levels)
    rows = result.rows

    def record(name, value, threshold, passed):
        rows.append({"check": name, "value": float(value),
                     "threshold": threshold, "passed": bool(passed)})
        if not passed:
            result.failures.append(name)

    conv = stokes_convergence(levels, cache)
    hs = np.log([r["h"] for r in conv])
    slope_u = np.polyfit(hs, np.log([r["error_u"] for r in conv]), 1)[0]
    slope_p = np.polyfit(hs, np.log([r["error_p"] for r in conv]), 1)[0]
    record("stokes velocity L2 order", slope_u, 2.0, slope_u >= 2.0)
    record("stokes pressure L2 order", slope_p, 1.5, slope_p >= 1.5)

    if len(levels) >= 3:
        tri = levels[-3:]
        for label, params, floor in (
                ("velocity-only", ControlParams(1e-4, 1.0, 0.0), 2.0),
                ("pressure-only", ControlParams(1e-2, 0.0, 1.0), 1.0)):
            rich = control_richardson(tri, params, cache)
            record(f"control Richardson order ({label})", rich["order"],
                   floor, rich["order"] >= floor)

    params = ControlParams(1e-4, 1.0, 1e-3)
    for level in levels[:2]:
        for chk in operator_checks(level, params, cache, seed=config.seed):
            record(chk.name, chk.value, chk.tol, chk.passed)
    for params in (ControlParams(1e-4, 1.0, 0.0), ControlParams(1e-2, 0.0, 1.0)):
        chk = lemma_check(min(levels), params, cache)
        record(chk.name, chk.value, chk.tol, chk.passed)
    chk = zero_target_check(min(levels), cache)
    record(chk.name, chk.value, chk.tol, chk.passed)
    return result


RUNNERS = {
    ExperimentKind.SPECTRUM: run_spectrum,
    ExperimentKind.SOLVE: run_solve,
    ExperimentKind.RECOVERY: run_recovery,
    ExperimentKind.TIMING: run_timing,
    ExperimentKind.VALIDATE: run_validate,
}


def run(config):
    return RUNNERS[config.experiment](config)
