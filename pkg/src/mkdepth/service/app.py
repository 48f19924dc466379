"""FastAPI application exposing the depth library over HTTP.

The CLI is a thin client of this app (run in-process by default); the
same endpoints serve remote clients under uvicorn:

    uvicorn mkdepth.service.app:app
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..depth import (
    fit_transport,
    model_from_json,
    model_to_json,
    quantile_contour,
    rank_reports,
    depth_region,
)
from ..errors import MKDepthError, ParseError, SolverError
from ..figure import render_figure
from ..measures import DiscreteMeasure, make_family, make_cube_mc, make_reference_grid, sample_spherical_uniform, measure_to_json
from ..metrics import run_convergence
from .schemas import (
    ContourRequest,
    ContourResponse,
    ContourSet,
    ConvergeRequest,
    ConvergeResponse,
    DepthReportModel,
    DepthRequest,
    DepthResponse,
    FigureRequest,
    FigureResponse,
    FitRequest,
    FitResponse,
    MeasureModel,
    ModelSummary,
    ReferenceSpec,
    RegionRequest,
    RegionResponse,
    SampleRequest,
    SampleResponse,
)
from .store import ModelStore, model_id_of


def _measure_from_model(m: MeasureModel) -> DiscreteMeasure:
    return DiscreteMeasure(
        points=np.asarray(m.points, dtype=float),
        weights=None if m.weights is None else np.asarray(m.weights, dtype=float),
    )


def build_reference(spec: ReferenceSpec):
    """Materialize a reference measure; returns (measure, profile name)."""
    if spec.kind == "ball-grid":
        if spec.rings is None or spec.spokes is None:
            raise ParseError("ball-grid needs rings and spokes")
        if spec.dim != 2:
            raise ParseError("ball-grid is two-dimensional")
        return make_reference_grid(spec.rings, spec.spokes).measure, "ball"
    if spec.count is None:
        raise ParseError(f"{spec.kind} needs a count")
    if spec.kind == "ball-mc":
        return sample_spherical_uniform(spec.count, spec.dim, spec.seed), "ball"
    return make_cube_mc(spec.count, spec.dim, spec.seed), "cube"


def create_app() -> FastAPI:
    app = FastAPI(title="mkdepth service", version=__version__)
    store = ModelStore()

    def run(stage: str, fn):
        try:
            return fn()
        except HTTPException:
            raise
        except MKDepthError as exc:
            status = 500 if isinstance(exc, SolverError) else 400
            raise HTTPException(
                status_code=status,
                detail={"code": exc.code, "message": exc.message, "stage": stage},
            ) from exc

    def resolve_model(stage: str, model_id, model):
        if model is not None:
            return run(stage, lambda: model_from_json(model))
        if model_id is None:
            raise HTTPException(
                status_code=400,
                detail={
                    "code": "unfitted",
                    "message": "provide model_id or an inline model",
                    "stage": stage,
                },
            )
        stored = store.get(model_id)
        if stored is None:
            raise HTTPException(
                status_code=404,
                detail={
                    "code": "unknown-model",
                    "message": f"no stored model with id {model_id}",
                    "stage": stage,
                },
            )
        return run(stage, lambda: model_from_json(stored))

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sample", response_model=SampleResponse)
    def sample(req: SampleRequest):
        def go():
            family = make_family(req.family, req.dim, **req.parameters)
            measure = family.sample(req.n, req.seed)
            return SampleResponse(measure=MeasureModel(**measure_to_json(measure)))

        return run("sample", go)

    @app.post("/fit", response_model=FitResponse)
    def fit(req: FitRequest):
        def go():
            data = _measure_from_model(req.data)
            reference, profile = build_reference(req.reference)
            fitted = fit_transport(
                data,
                reference,
                mode=req.solver,
                profile=profile,
                tol_mass=req.tol_mass,
                max_iters=req.max_iters,
            )
            fitted.metadata["reference"] = req.reference.model_dump()
            model_json = model_to_json(fitted)
            mid = store.put(model_json) if req.store else model_id_of(model_json)
            return FitResponse(model_id=mid, model=model_json, metadata=fitted.metadata)

        return run("fit", go)

    @app.get("/models")
    def list_models() -> list[ModelSummary]:
        out = []
        for mid in store.ids():
            m = store.get(mid)
            out.append(
                ModelSummary(
                    model_id=mid,
                    mode=m["mode"],
                    profile=m.get("profile", "ball"),
                    dim=m["data"]["dim"],
                    data_size=len(m["data"]["points"]),
                    reference_size=len(m["reference"]["points"]),
                )
            )
        return out

    @app.get("/models/{model_id}")
    def get_model(model_id: str) -> dict:
        stored = store.get(model_id)
        if stored is None:
            raise HTTPException(
                status_code=404,
                detail={
                    "code": "unknown-model",
                    "message": f"no stored model with id {model_id}",
                    "stage": "models",
                },
            )
        return stored

    @app.post("/depth", response_model=DepthResponse)
    def depth(req: DepthRequest):
        fit_obj = resolve_model("depth", req.model_id, req.model)

        def go():
            reports = rank_reports(fit_obj, req.queries)
            return DepthResponse(
                reports=[
                    DepthReportModel(
                        query=[float(v) for v in r.query],
                        vector_rank=[float(v) for v in r.vector_rank],
                        scalar_rank=r.scalar_rank,
                        sign=[float(v) for v in r.sign],
                        depth=r.depth,
                        extrapolated=r.extrapolated,
                    )
                    for r in reports
                ]
            )

        return run("depth", go)

    @app.post("/contour", response_model=ContourResponse)
    def contour(req: ContourRequest):
        fit_obj = resolve_model("contour", req.model_id, req.model)

        def go():
            out = []
            for t in req.taus:
                pts = quantile_contour(fit_obj, t, spokes=req.spokes)
                out.append(
                    ContourSet(tau=float(t), points=[[float(v) for v in p] for p in pts])
                )
            return ContourResponse(contours=out)

        return run("contour", go)

    @app.post("/region", response_model=RegionResponse)
    def region(req: RegionRequest):
        fit_obj = resolve_model("region", req.model_id, req.model)

        def go():
            pts = depth_region(fit_obj, req.tau)
            return RegionResponse(
                tau=float(req.tau), points=[[float(v) for v in p] for p in pts]
            )

        return run("region", go)

    @app.post("/figure", response_model=FigureResponse)
    def figure(req: FigureRequest):
        fit_obj = resolve_model("figure", req.model_id, req.model)

        def go():
            svg = render_figure(
                fit_obj,
                taus=req.taus,
                alpha=req.alpha,
                spokes=req.spokes,
                version=__version__,
            )
            return FigureResponse(svg=svg)

        return run("figure", go)

    @app.post("/converge", response_model=ConvergeResponse)
    def converge(req: ConvergeRequest):
        def go():
            family = make_family(req.family, req.dim, **req.parameters)
            result = run_convergence(
                family,
                req.sizes,
                req.seeds,
                req.band,
                taus=req.taus,
                probe_count=req.probe_count,
            )
            return ConvergeResponse(
                band=result.band, probe_count=result.probe_count, rows=result.rows
            )

        return run("converge", go)

    return app


app = create_app()
