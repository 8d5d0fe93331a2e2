import logging
from typing import Any, Dict, List

import numpy as np

from holehom.commands.commands_corrector import solve_bundle
from holehom.commands.commands_registry import Command, CommandContext, CommandRegistry
from holehom.corrector import CorrectorBundle
from holehom.quantify import (
    caccioppoli_check,
    corrector_growth_profile,
    decay_quantity,
    excess_decay_profile,
    hole_filling_ratio,
    locality_probe,
    mean_value_check,
    oscillation_scan,
    oscillation_shape_fit,
    oscillation_sum,
    regularity_radius,
    weighted_energy,
    weighted_mean,
)

logger = logging.getLogger(__name__)

RSTAR_COLUMNS = ("sample", "rstar", "C", "radius", "oscillation")
HOLEFILL_COLUMNS = ("sample", "R", "E", "eps_hat", "regime", "growth_exponent", "implied_gamma")
GROWTH_COLUMNS = ("sample", "direction", "radius", "value", "model")
PROBE_COLUMNS = ("probe", "radius", "position", "distance", "value", "residual")


def excess_columns(dimension: int) -> tuple:
    return ("sample", "r", "value") + tuple(f"xi_{i + 1}" for i in range(dimension)) + ("condition", "clamped")


def _position(point) -> str:
    return " ".join(repr(float(c)) for c in point)


class QuantifyCommands:
    """Commands measuring excess, regularity radius, growth, energies and sensitivity probes"""

    @staticmethod
    def register_all(registry: CommandRegistry):
        """Register all quantify commands"""

        quantify = Command(
            name="quantify",
            description="Excess decay, regularity radius, hole filling, corrector growth and energy probes for one geometry",
            outputs=("excess.csv", "rstar.csv", "holefill.csv", "growth.csv", "probes.csv"),
        )
        registry.register_command(quantify, QuantifyCommands.quantify)

        probe = Command(
            name="probe",
            description="Locality and oscillation probes under local resampling of the geometry",
            outputs=("probes.csv",),
        )
        registry.register_command(probe, QuantifyCommands.probe)

    @staticmethod
    async def quantify(context: CommandContext):
        cfg = context.config
        q = cfg.quantify
        seed = cfg.geometry.seed
        bundle = solve_bundle(context, with_sigma=True, with_aux=True)
        field = bundle.field
        solver = cfg.solver.to_solver()

        rstar = regularity_radius(bundle.phi_ext_stack(), bundle.sigma_stack(), field.grid, q.rstar_threshold_C, q.radii, q.center)
        logger.info(f"r* = {rstar.value:.4g} at C = {q.rstar_threshold_C:g}")
        context.run.write_csv("rstar.csv", RSTAR_COLUMNS, [
            {"sample": seed, "rstar": rstar.value, "C": rstar.threshold_C, "radius": row.radius, "oscillation": row.value}
            for row in rstar.rows
        ])

        profile = excess_decay_profile(field, bundle, q.probe_seed, rstar.value, solver, q.center, q.holder_alpha)
        excess_rows = []
        for r, result in profile.rows:
            row = {"sample": seed, "r": r, "value": result.value, "condition": result.condition, "clamped": result.clamped}
            row.update({f"xi_{i + 1}": float(x) for i, x in enumerate(result.xi)})
            excess_rows.append(row)
        context.run.write_csv("excess.csv", excess_columns(field.grid.dimension), excess_rows)

        hole_filling = hole_filling_ratio(bundle, 0, q.center, q.beta_value)
        context.run.write_csv("holefill.csv", HOLEFILL_COLUMNS, [
            {
                "sample": seed,
                "R": R,
                "E": E,
                "eps_hat": hole_filling.eps_hat,
                "regime": hole_filling.regime,
                "growth_exponent": hole_filling.growth_exponent,
                "implied_gamma": hole_filling.implied_gamma,
            }
            for R, E in hole_filling.rows
        ])

        growth_rows = []
        for i, entry in enumerate(bundle.directions):
            rows, fit = corrector_growth_profile(entry.phi_ext.data, field.grid, q.center)
            growth_rows.extend(
                {"sample": seed, "direction": i + 1, "radius": row.radius, "value": row.value, "model": fit.model}
                for row in rows
            )
        context.run.write_csv("growth.csv", GROWTH_COLUMNS, growth_rows)

        probes = QuantifyCommands._energy_probes(context, bundle, rstar.value)
        probes.append({"probe": "excess_slope", "position": _position(profile.center), "value": profile.slope})
        probes.append({"probe": "excess_slope_floor", "value": profile.slope_floor})
        if profile.meets_floor is False:
            logger.warning(f"Excess slope {profile.slope:.3g} is below the floor {profile.slope_floor:g}")
        context.run.write_csv("probes.csv", PROBE_COLUMNS, probes)
        logger.info(f"Hole filling eps = {hole_filling.eps_hat:.4g} ({hole_filling.regime}), excess slope {profile.slope}")

    @staticmethod
    def _energy_probes(context: CommandContext, bundle: CorrectorBundle, rstar: float) -> List[Dict[str, Any]]:
        cfg = context.config
        q = cfg.quantify
        field = bundle.field
        L = field.grid.box_side
        rows: List[Dict[str, Any]] = []

        mean_value = mean_value_check(field, bundle, q.probe_seed, rstar, cfg.solver.to_solver(), q.center)
        rows.extend({"probe": "mean_value", "radius": r, "value": ratio} for r, ratio in mean_value.rows)
        rows.append({"probe": "nondegeneracy", "value": mean_value.nondegeneracy_constant})

        R = q.caccioppoli_R if q.caccioppoli_R is not None else 0.25 * L
        rho = q.caccioppoli_rho if q.caccioppoli_rho is not None else 0.5 * R
        rows.append({"probe": "caccioppoli", "radius": R, "value": caccioppoli_check(bundle, 0, R, rho, q.center)})

        F, ratio = weighted_mean(bundle.directions[0].phi, field, R, q.center)
        rows.append({"probe": "weighted_mean", "radius": R, "value": F, "residual": ratio})
        rows.append({"probe": "weighted_energy", "value": weighted_energy(bundle, q.kappa, q.center).value})
        rows.append({"probe": "decay_quantity", "value": decay_quantity(bundle)})
        return rows

    @staticmethod
    async def probe(context: CommandContext):
        cfg = context.config
        q = cfg.quantify
        bundle = solve_bundle(context, with_sigma=True, with_aux=True)
        field = bundle.field
        solver = cfg.solver.to_solver()
        L = field.grid.box_side
        rows: List[Dict[str, Any]] = []

        R_list = q.locality_radii or [L / 8, L / 4]
        locality = locality_probe(field, bundle, R_list, q.probe_seed, kappa=q.kappa, cfg=solver, center=q.center)
        rows.extend({"probe": "locality", "radius": R, "value": gap} for R, gap in locality.rows)
        rows.append({"probe": "locality_rate", "value": locality.decay_rate})

        stride = q.oscillation_stride if q.oscillation_stride is not None else L / 4
        support = q.oscillation_support_r or [L / 8]
        sums = []
        for r in support:
            scan = oscillation_scan(field, bundle, r, q.oscillation_radius_M, q.probe_seed, stride, cfg=solver)
            rows.extend(
                {"probe": "oscillation", "radius": r, "position": _position(point), "distance": distance, "value": delta}
                for point, distance, delta in scan
            )
            sums.append(oscillation_sum(scan, stride))
            rows.append({"probe": "oscillation_sum", "radius": r, "value": sums[-1]})

        if len(support) >= 2:
            rows.append(QuantifyCommands._shape_row(context, bundle, support, sums))
        context.run.write_csv("probes.csv", PROBE_COLUMNS, rows)

    @staticmethod
    def _shape_row(context: CommandContext, bundle: CorrectorBundle, support, sums) -> Dict[str, Any]:
        """Fitted constant of the sensitivity shape, using this sample's r* and hole-filling exponent"""
        q = context.config.quantify
        field = bundle.field
        rstar = regularity_radius(bundle.phi_ext_stack(), bundle.sigma_stack(), field.grid, q.rstar_threshold_C, q.radii, q.center).value
        eps = hole_filling_ratio(bundle, 0, q.center, q.beta_value).eps_hat
        if not np.isfinite(rstar):
            logger.warning("r* is infinite on this sample; the oscillation shape fit is skipped")
            return {"probe": "oscillation_shape"}
        constant, residual = oscillation_shape_fit(support, sums, rstar, eps, field.grid.dimension)
        return {"probe": "oscillation_shape", "radius": rstar, "value": constant, "residual": residual}
