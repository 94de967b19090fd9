"""JSON problem configuration.

A problem file is a single JSON document with top-level keys ``grid``,
``time``, ``material``, ``peclet``, ``boundary_left``, ``boundary_right``
and ``initial``, all in dimensionless units.  Alternatively a
``dimensional`` block (physical units) may replace the coefficient blocks;
it triggers the nondimensionalization and must not coexist with them.
"""

from __future__ import annotations

import json

from .errors import ProblemDefinitionError
from .model import (
    AmbientSignal,
    CoefficientLaw,
    DimensionalScenario,
    Grid1D,
    MaterialModel,
    PecletModel,
    ProblemSpec,
    RobinBoundary,
    Sinusoid,
    TimeControls,
    nondimensionalize,
)

_DIMENSIONLESS_BLOCKS = ("material", "peclet", "boundary_left", "boundary_right", "initial")


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ProblemDefinitionError(f"missing key {key!r} in {where}")
    return mapping[key]


def _law_from(obj: dict, where: str) -> CoefficientLaw:
    if "value" in obj:
        return CoefficientLaw(float(obj["value"]))
    return CoefficientLaw(
        p0=float(_require(obj, "p0", where)),
        p1=float(obj.get("p1", 0.0)),
        gauss_amp=float(obj.get("gauss_amp", 0.0)),
        gauss_rate=float(obj.get("gauss_rate", 0.0)),
        gauss_center=float(obj.get("gauss_center", 0.0)),
    )


def _signal_from(obj: dict) -> AmbientSignal:
    return AmbientSignal(
        offset=float(obj.get("offset", 0.0)),
        sinusoids=tuple(Sinusoid(float(a), float(p), float(ph))
                        for a, p, ph in (s if len(s) == 3 else (*s, 0.0)
                                         for s in obj.get("sinusoids", ()))),
        steps=tuple((float(a), float(b), float(v)) for a, b, v in obj.get("steps", ())),
    )


def _boundary_from(obj: dict, side: str) -> RobinBoundary:
    return RobinBoundary(
        side=side,
        biot=float(_require(obj, "biot", f"boundary_{side}")),
        ambient=_signal_from(_require(obj, "ambient", f"boundary_{side}")),
        liquid_flux=float(obj.get("liquid_flux", 0.0)),
        advective=bool(obj.get("advective", False)),
    )


def _grid_from(obj: dict) -> Grid1D:
    if "node_count" in obj:
        return Grid1D.with_nodes(int(obj["node_count"]))
    if "dx" in obj:
        return Grid1D.with_spacing(float(obj["dx"]))
    raise ProblemDefinitionError("grid needs node_count or dx")


def _time_from(obj: dict) -> TimeControls:
    return TimeControls(
        step=float(_require(obj, "step", "time")),
        horizon=float(_require(obj, "horizon", "time")),
        mode=str(obj.get("mode", "fixed")),
        safety=float(obj.get("safety", 0.9)),
    )


def problem_from_dict(doc: dict) -> ProblemSpec:
    grid = _grid_from(_require(doc, "grid", "document"))
    time = _time_from(_require(doc, "time", "document"))

    if "dimensional" in doc:
        present = [k for k in _DIMENSIONLESS_BLOCKS if k in doc]
        if present:
            raise ProblemDefinitionError(
                "a dimensional block must not coexist with dimensionless blocks: "
                + ", ".join(present)
            )
        dim = doc["dimensional"]
        scenario = DimensionalScenario(
            length=float(_require(dim, "length", "dimensional")),
            time_ref=float(_require(dim, "time_ref", "dimensional")),
            diffusion_ref=float(_require(dim, "diffusion_ref", "dimensional")),
            vapour_pressure_init=float(_require(dim, "vapour_pressure_initial", "dimensional")),
            temperature=float(_require(dim, "temperature", "dimensional")),
            gas_constant=float(dim.get("gas_constant", 461.5)),
            velocity=float(dim.get("velocity", 0.0)),
            surface_left=float(dim.get("surface_left", 0.0)),
            surface_right=float(dim.get("surface_right", 0.0)),
            liquid_flux_left=float(dim.get("liquid_flux_left", 0.0)),
            phi_init=float(dim.get("relative_humidity_initial", 0.5)),
        )
        mat = _require(dim, "material", "dimensional")
        return nondimensionalize(
            scenario,
            _law_from(_require(mat, "storage", "dimensional.material"), "storage"),
            _law_from(_require(mat, "diffusion", "dimensional.material"), "diffusion"),
            _signal_from(_require(dim, "ambient_left", "dimensional")),
            _signal_from(_require(dim, "ambient_right", "dimensional")),
            grid,
            time,
            advective_left=bool(dim.get("advective_left", False)),
            advective_right=bool(dim.get("advective_right", False)),
            admissible_range=tuple(dim.get("admissible_range", (0.0, 3.0))),
        )

    mat = _require(doc, "material", "document")
    material = MaterialModel(
        storage=_law_from(_require(mat, "storage", "material"), "material.storage"),
        diffusion=_law_from(_require(mat, "diffusion", "material"), "material.diffusion"),
        admissible_range=tuple(mat.get("admissible_range", (0.0, 3.0))),
    )
    pe_obj = _require(doc, "peclet", "document")
    if "segments" in pe_obj:
        peclet = PecletModel.piecewise(pe_obj["segments"])
    else:
        peclet = PecletModel.constant(float(_require(pe_obj, "value", "peclet")))
    init = doc.get("initial", {})
    return ProblemSpec(
        grid=grid,
        time=time,
        material=material,
        peclet=peclet,
        left=_boundary_from(_require(doc, "boundary_left", "document"), "left"),
        right=_boundary_from(_require(doc, "boundary_right", "document"), "right"),
        initial_value=float(init.get("value", 1.0)),
        phi_initial=(float(init["relative_humidity"])
                     if "relative_humidity" in init else None),
    )


def problem_from_json(path) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemDefinitionError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProblemDefinitionError(f"problem file {path} must hold a JSON object")
    return problem_from_dict(doc)


def _law_to_dict(law: CoefficientLaw) -> dict:
    return {
        "p0": law.p0, "p1": law.p1, "gauss_amp": law.gauss_amp,
        "gauss_rate": law.gauss_rate, "gauss_center": law.gauss_center,
    }


def _signal_to_dict(sig: AmbientSignal) -> dict:
    return {
        "offset": sig.offset,
        "sinusoids": [[s.amplitude, s.period, s.phase] for s in sig.sinusoids],
        "steps": [list(s) for s in sig.steps],
    }


def _boundary_to_dict(b: RobinBoundary) -> dict:
    return {
        "biot": b.biot,
        "ambient": _signal_to_dict(b.ambient),
        "liquid_flux": b.liquid_flux,
        "advective": b.advective,
    }


def problem_to_dict(spec: ProblemSpec) -> dict:
    doc = {
        "grid": {"node_count": spec.grid.node_count},
        "time": {
            "step": spec.time.step, "horizon": spec.time.horizon,
            "mode": spec.time.mode, "safety": spec.time.safety,
        },
        "material": {
            "storage": _law_to_dict(spec.material.storage),
            "diffusion": _law_to_dict(spec.material.diffusion),
            "admissible_range": list(spec.material.admissible_range),
        },
        "peclet": ({"value": spec.peclet.value} if spec.peclet.is_constant
                   else {"segments": [list(s) for s in spec.peclet.segments]}),
        "boundary_left": _boundary_to_dict(spec.left),
        "boundary_right": _boundary_to_dict(spec.right),
        "initial": {"value": spec.initial_value},
    }
    if spec.phi_initial is not None:
        doc["initial"]["relative_humidity"] = spec.phi_initial
    return doc


def problem_to_json(spec: ProblemSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(spec), fh, indent=2)
        fh.write("\n")
