"""Experiment pipeline: runs one configured command and writes its report."""
import argparse
import asyncio
import csv
import io
import json
import logging
import math
import os
import sys
import threading
import time
from typing import Any, Callable, Dict, List, Optional, Sequence
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from config import FORMATS, VERSION, Config, config_hash, load_experiment_config
from errors import ConfigError, DomainError, NumericDomainError, NumericFailure
from models import ExperimentConfig, ModelSpec, RSConstants, SEState
from numerics import derive_seeds, generator
from spectral_law import (
    DiscreteAtoms,
    DiscreteEigenvalues,
    Gaussian,
    PointMass,
    Rademacher,
    Semicircle,
    cauchy,
    cauchy_inverse,
    free_cumulants,
    r_transform,
    standardize,
    transform_cache,
)
from rs_core import q_map, rs_constants, small_beta_expansion
from state_evolution import g_prime, run_state_evolution, se_limit_check
from ensemble_sim import (
    dump_iterates,
    freeness_check,
    freeness_functions,
    midpoint_quantiles,
    row_moment_check,
    run_amp,
    sample_model,
    trace_summary,
)
from oracle import (
    annealed_h0,
    brute_force_log_partition,
    enumerate_log_partition,
    enumeration_row,
    exact_log_z,
    spherical_finite_n_detailed,
    summarize,
)
from variational import (
    dv_decay,
    hciz_mc,
    hciz_rank1,
    hciz_rank2,
    inf_gamma_closed,
    inf_gamma_matrix_detailed,
    inf_gamma_matrix_numeric,
    inf_gamma_minimizer,
    inf_gamma_numeric,
    phi1_stationary,
    phi2_stationary,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _check(name: str, value: Optional[float], tolerance: float) -> Dict[str, Any]:
    passed = value is not None and math.isfinite(value) and value <= tolerance
    if not passed:
        logger.warning("check %s failed: %s > %s", name, value, tolerance)
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed)}


def _flag(name: str, ok: bool, detail: Any = None) -> Dict[str, Any]:
    if not ok:
        logger.warning("check %s failed: %s", name, detail)
    return {"name": name, "value": detail, "tolerance": None, "passed": bool(ok)}


def _non_increasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values[:-1], values[1:]))


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class ExperimentPipeline:
    """Orchestrates one experiment command over a bounded worker pool."""

    def __init__(self, experiment: ExperimentConfig, config: Optional[Config] = None):
        self.config = config or Config.from_env()
        self.config.ensure_directories()
        self.experiment = experiment
        self._semaphore = asyncio.Semaphore(max(1, self.config.threads))
        self._constants: Dict[ModelSpec, RSConstants] = {}
        self._constants_lock = threading.Lock()

    async def _run(self, func: Callable, *args) -> Any:
        async with self._semaphore:
            return await asyncio.to_thread(func, *args)

    async def _map(self, func: Callable, arguments: Sequence[tuple]) -> List[Any]:
        """Run ``func`` on every argument tuple; results keep submission order."""
        return list(await asyncio.gather(*(self._run(func, *args) for args in arguments)))

    def constants(self, model: ModelSpec) -> RSConstants:
        """Solved constants for ``model``, computed once per pipeline even under concurrent calls."""
        with self._constants_lock:
            if model not in self._constants:
                self._constants[model] = rs_constants(model, self.config.gh_order)
            return self._constants[model]

    def _model(self, beta: float, spectral, field) -> ModelSpec:
        return ModelSpec(beta, spectral, field, self.config.spectral_nodes)

    @property
    def seed(self) -> int:
        return 0 if self.experiment.seed is None else self.experiment.seed

    def free_energy_offset(self) -> float:
        """Shift back to the unstandardized couplings: ½·β_raw·mean(D)."""
        return 0.5 * float(self.experiment.raw["model"]["beta"]) * self.experiment.shift

    # --- commands -----------------------------------------------------------

    async def cmd_rs(self) -> Dict[str, Any]:
        model = self.experiment.model
        constants = await self._run(self.constants, model)
        offset = self.free_energy_offset()
        expansion = small_beta_expansion(model)
        results = {
            "constants": constants.to_dict(),
            "small_beta": {
                "prediction": expansion,
                "deviation": {k: getattr(constants, k) - v for k, v in expansion.items()},
            },
            "unstandardized": {
                "shift": self.experiment.shift,
                "scale": self.experiment.scale,
                "psi_rs": constants.psi_rs + offset,
                "psi_rs_sphere": constants.psi_rs_sphere + offset,
            },
        }
        checks = self._rs_identity_checks(model, constants)
        row = {k: v for k, v in constants.to_dict().items() if k != "solver"}
        row["beta"] = model.beta
        return {"results": results, "checks": checks, "table": [row]}

    async def cmd_se(self) -> Dict[str, Any]:
        model = self.experiment.model
        constants = await self._run(self.constants, model)
        state = await self._run(run_state_evolution, constants, model.field, self.experiment.t_max,
                                self.config.gh_order)
        limit = se_limit_check(state)
        results = {
            "delta": state.rows(),
            "limit": limit,
            "g_prime_at_delta_star": g_prime(constants, constants.delta_star, model.field, self.config.gh_order),
        }
        checks = [_check("se_min_eigenvalue", max(0.0, -float(np.linalg.eigvalsh(state.delta).min())), 1e-10)]
        table = [
            {"s": i + 1, "t": j + 1, "delta": value}
            for i, row in enumerate(state.rows()) for j, value in enumerate(row)
        ]
        return {"results": results, "checks": checks, "table": table}

    async def cmd_amp(self) -> Dict[str, Any]:
        model = self.experiment.model
        n = self.experiment.n_list[0] if self.experiment.n_list else self.experiment.acceptance["amp_n"]
        return await self._amp_block(model, n, self.experiment.t_max, self.experiment.replicates,
                                     self.seed, dump=True)

    async def cmd_enumerate(self) -> Dict[str, Any]:
        n_list = self.experiment.n_list or self.experiment.acceptance["enumerate_n_list"]
        return await self._enumeration_block(self.experiment.model, n_list, self.experiment.replicates, self.seed)

    async def cmd_sphere(self) -> Dict[str, Any]:
        model = self.experiment.model
        n = self.experiment.n_list[0] if self.experiment.n_list else self.experiment.acceptance["sphere_n"]
        block = await self._sphere_block(model, n, self.experiment.replicates, self.seed)
        offset = self.free_energy_offset()
        block["results"]["unstandardized"] = {
            "mean": block["results"]["mean"] + offset,
            "psi_rs_sphere": block["results"]["psi_rs_sphere"] + offset,
        }
        return block

    async def cmd_hciz(self) -> Dict[str, Any]:
        return await self._hciz_block(self.experiment.model, self.experiment.hciz, self.seed)

    async def cmd_validate(self) -> Dict[str, Any]:
        """Run every acceptance section; the report passes only if all checks do."""
        sections = [
            ("transforms", self._validate_transforms),
            ("rs_identities", self._validate_rs_identities),
            ("stationary", self._validate_stationary),
            ("infgamma", self._validate_infgamma),
            ("amp", self._validate_amp),
            ("enumerate", self._validate_enumeration),
            ("sphere", self._validate_sphere),
            ("hciz", self._validate_hciz),
            ("oracles", self._validate_oracles),
            ("determinism", self._validate_determinism),
        ]
        results: Dict[str, Any] = {}
        checks: List[Dict[str, Any]] = []
        timing: Dict[str, float] = {}
        seeds = derive_seeds(self.seed, len(sections))
        for (name, section), seed in zip(sections, seeds):
            logger.info("validate: %s", name)
            start = time.perf_counter()
            block = await section(seed)
            timing[name] = time.perf_counter() - start
            results[name] = block.get("results", {})
            for check in block.get("checks", []):
                checks.append({**check, "name": f"{name}.{check['name']}"})
        table = [{"name": c["name"], "value": c["value"], "tolerance": c["tolerance"], "passed": c["passed"]}
                 for c in checks]
        return {"results": results, "checks": checks, "table": table, "timing": timing}

    # --- shared blocks ------------------------------------------------------

    def _rs_identity_checks(self, model: ModelSpec, constants: RSConstants) -> List[Dict[str, Any]]:
        tol = self.experiment.tolerances["rs_identity"]
        q, z = constants.q_star, constants.one_minus_q
        return [
            _check("kappa_delta_sigma", abs(constants.kappa_star * constants.delta_star - constants.sigma_star_sq), tol),
            _check("delta_algebraic", abs(constants.delta_star - (q / z ** 2 - constants.sigma_star_sq)), tol),
            _check("delta_gaussian", abs(constants.delta_star_gaussian - constants.delta_star), tol),
            _check("lambda_identity", abs(constants.lambda_star - (constants.a_star + 1.0 / z)), tol),
            _check("q_fixed_point", abs(q_map(model, q, self.config.gh_order) - q), tol),
        ]

    def _amp_replicate(self, model: ModelSpec, constants: RSConstants, se_state: SEState,
                       n: int, T: int, seed: int, dump_path: Optional[str]) -> Dict[str, Any]:
        sample = sample_model(model, n, seed, self.experiment.placement)
        trace = run_amp(sample, model, constants, T)
        summary = trace_summary(trace, sample, model, constants, se_state)
        summary["row_moments"] = row_moment_check(trace, sample, model, constants, T)
        summary["_freeness"] = {
            name: freeness_check(trace, sample, model, se_state, f)
            for name, f in freeness_functions(constants).items()
        }
        if dump_path:
            summary["iterates"] = dump_iterates(trace, dump_path)
        return summary

    async def _amp_block(self, model: ModelSpec, n: int, T: int, replicates: int, seed: int,
                         dump: bool = False) -> Dict[str, Any]:
        constants = await self._run(self.constants, model)
        se_state = await self._run(run_state_evolution, constants, model.field, T, self.config.gh_order)
        seeds = derive_seeds(seed, replicates)
        arguments = []
        for i, child in enumerate(seeds):
            path = os.path.join(self.config.output_dir, f"amp_n{n}_seed{child}.bin") if dump and i == 0 else None
            arguments.append((model, constants, se_state, n, T, child, path))
        summaries = await self._map(self._amp_replicate, arguments)

        delta = se_state.leading(T)
        kappa = constants.kappa_star
        mean_xx = np.mean([s["gram_xx"] for s in summaries], axis=0)
        mean_yy = np.mean([s["gram_yy"] for s in summaries], axis=0)
        mean_xy = np.mean([s["gram_xy"] for s in summaries], axis=0)
        averaged = {
            "xx": float(np.max(np.abs(mean_xx - delta))),
            "yy": float(np.max(np.abs(mean_yy - kappa * delta))),
            "xy": float(np.max(np.abs(mean_xy))),
        }
        freeness = {
            name: float(np.max(np.abs(np.mean([s["_freeness"][name] for s in summaries], axis=0))))
            for name in summaries[0]["_freeness"]
        }
        for summary in summaries:
            summary.pop("_freeness")

        tol = self.experiment.tolerances
        checks = [_check(f"gram_{key}", value, tol["se_gram"]) for key, value in averaged.items()]
        checks += [_check(f"freeness_{key}", value, tol["freeness"]) for key, value in freeness.items()]
        table = [
            {"seed": s["seed"], "n": s["n"], "T": s["T"],
             "gram_xx": s["gram_deviation"]["xx"], "gram_yy": s["gram_deviation"]["yy"],
             "gram_xy": s["gram_deviation"]["xy"],
             "tap_residual": s["tap_residuals"][-1] if s["tap_residuals"] else None}
            for s in summaries
        ]
        results = {
            "n": n,
            "T": T,
            "delta": se_state.rows(),
            "averaged_gram_deviation": averaged,
            "averaged_freeness_deviation": freeness,
            "replicates": summaries,
        }
        return {"results": results, "checks": checks, "table": table}

    def _enumerate_one(self, model: ModelSpec, n: int, seed: int):
        return exact_log_z(sample_model(model, n, seed, self.experiment.placement), model)

    async def _enumeration_block(self, model: ModelSpec, n_list: Sequence[int], replicates: int,
                                 seed: int) -> Dict[str, Any]:
        constants = await self._run(self.constants, model)
        psi = constants.psi_rs
        roots = derive_seeds(seed, len(n_list))
        rows: List[Dict[str, Any]] = []
        per_n: List[Dict[str, Any]] = []
        timing: List[Dict[str, Any]] = []
        for n, root in zip(n_list, roots):
            outcomes = await self._map(self._enumerate_one, [(model, n, s) for s in derive_seeds(root, replicates)])
            n_rows = [enumeration_row(r, psi) for r in outcomes]
            rows.extend(n_rows)
            timing.extend({"n": r.n, "seed": r.seed, "seconds": r.wall_time} for r in outcomes)
            mean, stderr = summarize([r["log_z_per_n"] for r in n_rows])
            per_n.append({
                "n": n,
                "mean": mean,
                "stderr": stderr,
                "median_gap": float(np.median([r["gap"] for r in n_rows])),
            })
            logger.info("n=%d: mean log Z/n = %.6f (psi_rs %.6f)", n, mean, psi)

        results: Dict[str, Any] = {"psi_rs": psi, "per_n": per_n}
        if model.field.is_zero:
            try:
                results["annealed"] = annealed_h0(model)
            except DomainError as exc:
                logger.info("annealed value unavailable: %s", exc)
        largest = per_n[-1]
        checks = [
            _check("largest_n_gap", abs(largest["mean"] - psi), self.experiment.tolerances["enumerate_gap"]),
            _flag("median_gap_non_increasing",
                  _non_increasing([abs(p["median_gap"]) for p in per_n]),
                  [p["median_gap"] for p in per_n]),
        ]
        return {"results": results, "checks": checks, "table": rows, "timing": {"enumeration": timing}}

    def _sphere_one(self, model: ModelSpec, n: int, seed: int) -> Dict[str, Any]:
        return spherical_finite_n_detailed(sample_model(model, n, seed, self.experiment.placement), model)

    async def _sphere_block(self, model: ModelSpec, n: int, replicates: int, seed: int) -> Dict[str, Any]:
        constants = await self._run(self.constants, model)
        rows = await self._map(self._sphere_one, [(model, n, s) for s in derive_seeds(seed, replicates)])
        mean, stderr = summarize([r["value"] for r in rows])
        results = {
            "n": n,
            "mean": mean,
            "stderr": stderr,
            "psi_rs_sphere": constants.psi_rs_sphere,
            "sphere_gamma": constants.sphere_gamma,
        }
        checks = [_check("sphere_gap", abs(mean - constants.psi_rs_sphere), self.experiment.tolerances["sphere_gap"])]
        return {"results": results, "checks": checks, "table": rows}

    async def _hciz_block(self, model: ModelSpec, params: Dict[str, Any], seed: int) -> Dict[str, Any]:
        n = int(params["n"])
        alpha = float(params["alpha"])
        epsilon = params.get("epsilon")
        u = midpoint_quantiles(n)
        d_bar = model.beta * np.asarray(model.spectral.quantile(u), dtype=float)
        a = math.sqrt(alpha) * np.ones(n)
        b = float(params["b_scale"]) * np.asarray(Gaussian().quantile(u), dtype=float)
        c = math.sqrt(alpha) * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)

        rank1 = hciz_rank1(a, b, d_bar, epsilon)
        mc = await self._run(hciz_mc, a, b, d_bar, int(params["draws"]), seed, self.config.mc_chunk)
        rank2 = await self._run(hciz_rank2, a, b, c, b[::-1], d_bar, epsilon)
        gap = abs(mc["value"] - rank1.value)
        tol = self.experiment.tolerances
        if gap > tol["hciz_warn"]:
            logger.warning("HCIZ Monte Carlo gap %.4g exceeds %.4g", gap, tol["hciz_warn"])

        zero = np.zeros(n)
        free = hciz_rank1(a, zero, d_bar, epsilon)
        try:
            limit = inf_gamma_closed(alpha, model.transforms, crosscheck=False)
        except DomainError as exc:
            logger.info("no large-n limit for alpha=%.4g: %s", alpha, exc)
            limit = None
        results = {
            "rank1": rank1.to_dict(),
            "rank2": rank2.to_dict(),
            "monte_carlo": mc,
            "mc_gap": gap,
            "status": "ok" if gap <= tol["hciz_warn"] else ("warn" if gap <= tol["hciz_fail"] else "fail"),
            "zero_load": {"value": free.value, "limit": limit,
                          "gap": None if limit is None else abs(free.value - limit)},
        }
        checks = [_check("mc_gap", gap, tol["hciz_fail"])]
        if n % 2 == 0:
            decoupled = hciz_rank2(a, zero, c, zero, d_bar, epsilon)
            checks.append(_check("rank2_decoupled", abs(decoupled.value - 2.0 * free.value), 1e-8))
        table = [
            {"kind": "rank1", "value": rank1.value, "gamma": rank1.gamma_opt, "boundary": rank1.boundary_active},
            {"kind": "rank2", "value": rank2.value, "gamma": rank2.gamma, "boundary": rank2.boundary_active},
            {"kind": "monte_carlo", "value": mc["value"], "gamma": None, "boundary": None},
        ]
        return {"results": results, "checks": checks, "table": table}

    # --- acceptance sections ------------------------------------------------

    async def _validate_transforms(self, seed: int) -> Dict[str, Any]:
        tol = self.experiment.tolerances["transform"]
        semicircle, rademacher = Semicircle(), Rademacher()
        three_atom = standardize(DiscreteEigenvalues((-1.0, 0.0, 2.0), (0.3, 0.4, 0.3))).law
        semicircle_r = max(abs(r_transform(semicircle, z) - z) for z in (0.1, 0.3, 0.5, 0.9))
        rademacher_r = max(
            abs(r_transform(rademacher, g) - (math.sqrt(1.0 + 4.0 * g * g) - 1.0) / (2.0 * g))
            for g in (0.1, 0.5, 1.0, 2.0)
        )
        round_trip = max(
            abs(cauchy(law, cauchy_inverse(law, alpha)) - alpha)
            for law in (semicircle, rademacher, three_atom) for alpha in (0.2, 0.5, 0.8)
        )
        cumulants = max(
            float(np.max(np.abs(np.asarray(free_cumulants(semicircle, 6)) - [0, 1, 0, 0, 0, 0]))),
            float(np.max(np.abs(np.asarray(free_cumulants(rademacher, 6)) - [0, 1, 0, -1, 0, 2]))),
        )
        checks = [
            _check("semicircle_r", semicircle_r, tol),
            _check("rademacher_r", rademacher_r, tol),
            _check("cauchy_round_trip", round_trip, tol),
            _check("free_cumulants", cumulants, tol),
        ]
        return {"results": {"three_atom": three_atom.to_dict()}, "checks": checks}

    def _identity_grid_point(self, law, field, beta: float) -> Dict[str, Any]:
        model = self._model(beta, law, field)
        constants = self.constants(model)
        checks = self._rs_identity_checks(model, constants)
        return {
            "law": law.kind,
            "field": field.to_dict(),
            "beta": beta,
            "q_star": constants.q_star,
            "errors": {c["name"]: c["value"] for c in checks},
        }

    async def _validate_rs_identities(self, seed: int) -> Dict[str, Any]:
        laws = [Semicircle(), Rademacher(), standardize(DiscreteEigenvalues((-1.0, 0.0, 2.0), (0.3, 0.4, 0.3))).law]
        fields = [
            PointMass(0.3),
            DiscreteAtoms((-0.5, 0.5), (0.5, 0.5)),
            Gaussian(0.0, 0.5, self.config.field_order),
        ]
        grid = [(law, field, beta) for law in laws for field in fields for beta in (0.05, 0.1, 0.2)]
        points = await self._map(self._identity_grid_point, grid)
        tol = self.experiment.tolerances["rs_identity"]
        names = points[0]["errors"].keys()
        checks = [_check(name, max(p["errors"][name] for p in points), tol) for name in names]
        return {"results": {"grid": points}, "checks": checks}

    def _stationary_case(self, law, beta: float, h: float, t_max: int) -> Dict[str, Any]:
        model = self._model(beta, law, PointMass(h))
        constants = self.constants(model)
        se_state = run_state_evolution(constants, model.field, t_max + 1, self.config.gh_order)
        first = [phi1_stationary(model, constants, se_state, t, self.config.gh_order) for t in range(1, t_max + 1)]
        second = [phi2_stationary(model, constants, se_state, t, self.config.gh_order) for t in range(1, t_max + 1)]
        return {
            "law": law.kind,
            "beta": beta,
            "phi1": [r.to_dict() for r in first],
            "phi2": [r.to_dict() for r in second],
            "dv_decay": dv_decay(first, constants),
            "se_bound_holds": se_limit_check(se_state).get("bound_holds", True),
            "phi1_value_error": max(r.value_error for r in first),
            "phi2_value_error": max(r.value_error for r in second),
            "max_partial": max(max(r.max_partial for r in first), max(r.max_partial for r in second)),
        }

    async def _validate_stationary(self, seed: int) -> Dict[str, Any]:
        t_max = int(self.experiment.acceptance["stationary_t_max"])
        cases = [(law, beta, 0.3, t_max) for law in (Rademacher(), Semicircle()) for beta in (0.05, 0.1)]
        reports = await self._map(self._stationary_case, cases)
        tol = self.experiment.tolerances
        checks = [
            _check("phi1_value", max(r["phi1_value_error"] for r in reports), tol["phi1_value"]),
            _check("phi2_value", max(r["phi2_value_error"] for r in reports), tol["phi2_value"]),
            _check("partials", max(r["max_partial"] for r in reports), tol["partials"]),
            _flag("se_offdiagonal_bound", all(r["se_bound_holds"] for r in reports)),
            _flag("dv_monotone", all(r["dv_decay"]["monotone"] for r in reports),
                  [r["dv_decay"]["decay_ratio"] for r in reports]),
        ]
        return {"results": {"cases": reports}, "checks": checks}

    def _infgamma_case(self, law, rng_seed: int, draws: int) -> Dict[str, float]:
        transforms = transform_cache(law, self.config.spectral_nodes)
        rng = generator(rng_seed)
        scalar, minimizer, matrix = 0.0, 0.0, 0.0
        for _ in range(draws):
            alpha = float(rng.uniform(0.05, 0.9))
            numeric = inf_gamma_numeric(alpha, transforms)
            scalar = max(scalar, abs(numeric.value - inf_gamma_closed(alpha, transforms, crosscheck=False)))
            minimizer = max(minimizer, abs(numeric.x - inf_gamma_minimizer(alpha, transforms)))

            eigenvalues = np.sort(rng.uniform(0.05, 0.9, size=2))
            angle = float(rng.uniform(0.0, math.pi))
            rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
            a_matrix = rotation @ np.diag(eigenvalues) @ rotation.T
            a_matrix = 0.5 * (a_matrix + a_matrix.T)
            closed = inf_gamma_matrix_detailed(a_matrix, transforms)["value"]
            matrix = max(matrix, abs(inf_gamma_matrix_numeric(a_matrix, transforms)["value"] - closed))
        return {"law": law.kind, "scalar": scalar, "minimizer": minimizer, "matrix": matrix}

    async def _validate_infgamma(self, seed: int) -> Dict[str, Any]:
        draws = int(self.experiment.acceptance["infgamma_draws"])
        laws = [Semicircle(), Rademacher()]
        cases = await self._map(self._infgamma_case, [(law, s, draws) for law, s in zip(laws, derive_seeds(seed, 2))])
        tol = self.experiment.tolerances
        checks = [
            _check("scalar", max(c["scalar"] for c in cases), tol["infgamma_scalar"]),
            _check("minimizer", max(c["minimizer"] for c in cases), 1e-6),
            _check("matrix", max(c["matrix"] for c in cases), tol["infgamma_matrix"]),
        ]
        return {"results": {"cases": cases}, "checks": checks}

    async def _validate_amp(self, seed: int) -> Dict[str, Any]:
        acc = self.experiment.acceptance
        model = self._model(acc["amp_beta"], Rademacher(), PointMass(acc["amp_h"]))
        block = await self._amp_block(model, int(acc["amp_n"]), int(acc["amp_T"]), int(acc["amp_seeds"]), seed)
        block.pop("table")
        return block

    async def _validate_enumeration(self, seed: int) -> Dict[str, Any]:
        acc = self.experiment.acceptance
        model = self._model(acc["enumerate_beta"], Rademacher(), PointMass(acc["enumerate_h"]))
        block = await self._enumeration_block(model, acc["enumerate_n_list"], int(acc["enumerate_replicates"]), seed)
        block["results"]["rows"] = block.pop("table")
        block.pop("timing")
        return block

    async def _validate_sphere(self, seed: int) -> Dict[str, Any]:
        acc = self.experiment.acceptance
        model = self._model(acc["sphere_beta"], Semicircle(), Gaussian(0.0, acc["sphere_sd"], self.config.field_order))
        block = await self._sphere_block(model, int(acc["sphere_n"]), int(acc["sphere_draws"]), seed)
        block["results"]["rows"] = block.pop("table")
        return block

    async def _validate_hciz(self, seed: int) -> Dict[str, Any]:
        acc = self.experiment.acceptance
        params = {**self.experiment.hciz, "n": acc["hciz_n"], "draws": acc["hciz_draws"]}
        block = await self._hciz_block(self._model(0.1, Semicircle(), PointMass(0.0)), params, seed)
        block.pop("table")
        return block

    async def _validate_oracles(self, seed: int) -> Dict[str, Any]:
        model = self._model(0.1, Rademacher(), PointMass(0.3))
        gray_error = 0.0
        for child in derive_seeds(seed, 3):
            sample = sample_model(model, 10, child, "iid")
            coupling = sample.coupling(model.beta)
            gray, _ = enumerate_log_partition(coupling, sample.h, 4)
            gray_error = max(gray_error, abs(gray - brute_force_log_partition(coupling, sample.h)))

        zero_field = self._model(0.1, Rademacher(), PointMass(0.0))
        annealed_error = abs(annealed_h0(zero_field) - self.constants(zero_field).psi_rs)
        checks = [
            _check("gray_code_vs_brute_force", gray_error, self.experiment.tolerances["oracle"]),
            _check("annealed_zero_field", annealed_error, self.experiment.tolerances["rs_identity"]),
        ]
        return {"results": {"gray_error": gray_error, "annealed_error": annealed_error}, "checks": checks}

    async def _validate_determinism(self, seed: int) -> Dict[str, Any]:
        model = self._model(0.1, Rademacher(), PointMass(0.3))
        seeds = derive_seeds(seed, 4)
        pooled = await self._map(self._enumerate_one, [(model, 12, s) for s in seeds])
        serial = [self._enumerate_one(model, 12, s) for s in seeds]
        difference = max(abs(a.log_z - b.log_z) for a, b in zip(pooled, serial))
        return {"results": {"max_difference": difference}, "checks": [_check("pooled_vs_serial", difference, 0.0)]}

    # --- driver -------------------------------------------------------------

    async def run(self) -> Dict[str, Any]:
        command = self.experiment.command
        handler = getattr(self, f"cmd_{command}")
        logger.info("running %s (seed=%s, threads=%d)", command, self.experiment.seed, self.config.threads)
        start = time.perf_counter()
        body = await handler()
        checks = body.get("checks", [])
        timing = dict(body.get("timing", {}))
        timing["total_seconds"] = time.perf_counter() - start
        return {
            "command": command,
            "version": VERSION,
            "config_hash": config_hash(self.experiment.raw),
            "seed": self.experiment.seed,
            "model": self.experiment.model.to_dict(),
            "results": body.get("results", {}),
            "checks": checks,
            "passed": all(c["passed"] for c in checks),
            "table": body.get("table", []),
            "timing": timing,
        }


def render_report(report: Dict[str, Any], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2, default=_to_builtin) + "\n"
    rows = report.get("table", [])
    if not rows:
        return ""
    columns = list(rows[0].keys())
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_to_cell(row.get(column)) for column in columns])
    return buffer.getvalue()


def _to_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_report(report: Dict[str, Any], path: Optional[str], fmt: str) -> None:
    text = render_report(report, fmt)
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(text)
    logger.info("report written to %s", path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthoglass",
        description="Replica-symmetric free energies, state evolution and finite-n checks "
                    "for orthogonally invariant spin glasses.",
    )
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--seed", type=int, help="override the experiment seed")
    parser.add_argument("--threads", type=int, help="worker threads (default from ORTHOGLASS_THREADS)")
    parser.add_argument("--out", help="report path (stdout when omitted)")
    parser.add_argument("--format", choices=FORMATS, help="report format")
    parser.add_argument("--log-level", help="logging level (default from ORTHOGLASS_LOG_LEVEL)")
    return parser


async def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = Config.from_env()
    if args.threads is not None:
        config.threads = max(1, args.threads)
    if args.log_level:
        config.log_level = args.log_level
    logging.basicConfig(level=config.log_level.upper(), format=LOG_FORMAT, stream=sys.stderr)

    overrides = {"seed": args.seed} if args.seed is not None else None
    try:
        experiment = load_experiment_config(args.config, config, overrides)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    if args.out:
        experiment.output_path = args.out
    if args.format:
        experiment.output_format = args.format

    pipeline = ExperimentPipeline(experiment, config)
    try:
        report = await pipeline.run()
    except (NumericDomainError, NumericFailure) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_NUMERIC

    write_report(report, experiment.output_path, experiment.output_format)
    if not report["passed"]:
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        logger.error("%d check(s) failed: %s", len(failed), ", ".join(failed))
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
