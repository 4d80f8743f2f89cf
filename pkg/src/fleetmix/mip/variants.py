"""
Model variants behind the stochastic measures: first-stage decisions or
per-type fleet counts of a reference plan, either fixed or imposed as lower
bounds.
"""

import logging
from enum import Enum

from ..domain import DEPOT
from .decode import PlanSolution
from .formulations import FIRST_STAGE, fleet_group
from .model import Constraint, MipError, MipModel, Sense, vname

logger = logging.getLogger(__name__)


class IncompatibleReferenceError(MipError):
    """The reference plan cannot be expressed in the model's variables."""

    pass


class MeasureVariant(Enum):
    FIX_FIRST_STAGE = "fix_first_stage"
    FIX_FLEET = "fix_fleet"
    LB_FIRST_STAGE = "lb_first_stage"
    LB_FLEET = "lb_fleet"

    @property
    def is_fixing(self) -> bool:
        return self in (MeasureVariant.FIX_FIRST_STAGE, MeasureVariant.FIX_FLEET)

    @property
    def touches_routes(self) -> bool:
        return self in (MeasureVariant.FIX_FIRST_STAGE, MeasureVariant.LB_FIRST_STAGE)


def first_stage_names(model: MipModel, reference: PlanSolution) -> list[str]:
    """Names of the first-stage binaries equal to one in ``reference``."""
    names = []
    if model.kind == "node":
        for planned in reference.routes:
            p, seq = planned.vehicle_type, planned.sequence
            names.append(vname("x", DEPOT, seq[0], p))
            names.extend(vname("x", a, b, p) for a, b in zip(seq, seq[1:]))
            names.extend(vname("v", i, p) for i in seq[:-1])
            names.append(vname("z", seq[-1], p))
    elif model.kind == "path":
        pool = model.context.pool if model.context is not None else None
        if pool is None:
            raise IncompatibleReferenceError("Path model has no route pool to match the reference against")
        for planned in reference.routes:
            r = pool.index_of(planned.sequence)
            if r is None:
                raise IncompatibleReferenceError(f"Reference route {planned.sequence} is not in the pool")
            names.append(vname("psi", r, planned.vehicle_type))
    else:
        raise IncompatibleReferenceError(f"Model kind {model.kind!r} has no first stage")
    missing = [name for name in names if name not in model.var_index]
    if missing:
        raise IncompatibleReferenceError(f"Model {model.name} lacks reference variables {missing}")
    return names


def apply_measure_variant(model: MipModel, variant: MeasureVariant | str, reference: PlanSolution) -> MipModel:
    """Copy of ``model`` with the reference's first stage or fleet fixed or lower-bounded."""
    variant = MeasureVariant(variant)
    name = vname(model.name, variant.value)
    if variant.touches_routes:
        active = {model.index(n) for n in first_stage_names(model, reference)}
        bounds = {}
        for idx in model.groups.get(FIRST_STAGE, ()):
            value = 1.0 if idx in active else 0.0
            if variant.is_fixing:
                bounds[idx] = (value, value)
            elif value:
                bounds[idx] = (1.0, 1.0)
        logger.info(f"{variant.value}: {len(active)} first-stage variables at one")
        return model.with_changes(bounds=bounds, name=name)

    type_ids = [key.split(":", 1)[1] for key in model.groups if key.startswith("fleet:")]
    unknown = set(reference.fleet) - set(type_ids)
    if unknown:
        raise IncompatibleReferenceError(f"Reference uses vehicle types {sorted(unknown)} unknown to the model")
    sense = Sense.EQ if variant.is_fixing else Sense.GE
    constraints = []
    for type_id, count in reference.fleet_counts(type_ids).items():
        terms = tuple((idx, 1.0) for idx in sorted(model.groups[fleet_group(type_id)]))
        if not terms:
            if count:
                raise IncompatibleReferenceError(f"Model has no {type_id} routes for {count} reference vehicles")
            continue
        constraints.append(Constraint(vname("fleet", type_id, variant.value), terms, sense, float(count)))
    logger.info(f"{variant.value}: fleet {reference.fleet}")
    return model.with_changes(constraints=constraints, name=name)
