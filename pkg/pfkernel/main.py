"""
pfkernel service
FastAPI web server over the diagram, distance, Gram and KFDR pipeline
"""
import math
from typing import Any, Dict, List

import numpy as np
import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from pfkernel import __version__
from pfkernel.core.diagram import EssentialPolicy, PersistenceDiagram
from pfkernel.core.homology import PointCloud, rips_persistence
from pfkernel.core.kernels import gram
from pfkernel.core.measure import SmoothingParams
from pfkernel.core.metric import fim
from pfkernel.modules.learn import KfdrConfig, kfdr_argmax, kfdr_scan
from pfkernel.utils.errors import PFKernelError
from pfkernel.utils.logger import setup_logger
from pfkernel.utils.response_models import (
    BaseResponse,
    DiagramPayload,
    DistanceRequest,
    DistanceResult,
    GramRequest,
    GramResult,
    KfdrRequest,
    KfdrResult,
    PersistenceRequest,
    PersistenceResult,
)

logger = setup_logger(__name__)

app = FastAPI(
    title="pfkernel",
    description="Persistence Fisher kernel toolkit",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def to_diagram(payload: DiagramPayload, essential: str) -> PersistenceDiagram:
    """Null deaths are essential points; the policy then drops or caps them."""
    rows = [(b, math.inf if d is None else d) for b, d in payload.points]
    diagram = PersistenceDiagram(rows, payload.homology_dimension)
    return diagram.resolve_essential(EssentialPolicy.parse(essential))


def from_diagram(diagram: PersistenceDiagram) -> DiagramPayload:
    rows = [(p.birth, None if p.is_essential else p.death) for p in diagram]
    return DiagramPayload(points=rows, homology_dimension=diagram.homology_dimension)


def error_body(e: Exception) -> Dict[str, Any]:
    if isinstance(e, PFKernelError):
        return {"status": "error", "message": str(e), "error": e.code}
    return {"status": "error", "message": str(e), "error": type(e).__name__}


@app.get("/api/status", response_model=BaseResponse, tags=["system"])
def api_status() -> Dict[str, str]:
    """Health check"""
    logger.info("status check")
    return {"status": "success", "message": f"pfkernel {__version__} is running"}


@app.post("/api/persistence", response_model=PersistenceResult, response_model_exclude_unset=True, tags=["diagrams"])
def api_persistence(request: PersistenceRequest) -> Dict[str, Any]:
    """
    Vietoris-Rips persistence of a point cloud.
    """
    logger.info(f"persistence request: {len(request.points)} points, max_dim={request.max_dim}")

    try:
        cloud = PointCloud(np.asarray(request.points, dtype=float))
        max_scale = np.inf if request.max_scale is None else request.max_scale
        diagrams = rips_persistence(cloud, request.max_dim, max_scale)
        return {
            "status": "success",
            "diagrams": [from_diagram(d).model_dump() for d in diagrams],
        }
    except Exception as e:
        logger.error(f"persistence failed: {e}", exc_info=True)
        return error_body(e)


@app.post("/api/dist", response_model=DistanceResult, response_model_exclude_unset=True, tags=["distances"])
def api_dist(request: DistanceRequest) -> Dict[str, Any]:
    """
    d_FIM between two diagrams.
    """
    logger.info(f"distance request: sigma={request.sigma}, accel={request.accel}")

    try:
        dg_i = to_diagram(request.diagram_i, request.essential)
        dg_j = to_diagram(request.diagram_j, request.essential)
        params = SmoothingParams(sigma=request.sigma, accel=request.accel, epsilon=request.epsilon)
        result = fim(dg_i, dg_j, params)
        return {
            "status": "success",
            "value": result.value,
            "support_size": result.support_size,
            "accel_used": result.accel_used,
        }
    except Exception as e:
        logger.error(f"distance failed: {e}", exc_info=True)
        return error_body(e)


@app.post("/api/gram", response_model=GramResult, response_model_exclude_unset=True, tags=["kernels"])
def api_gram(request: GramRequest) -> Dict[str, Any]:
    """
    Gram matrix of a diagram set for any supported kernel.
    """
    logger.info(f"gram request: {len(request.diagrams)} diagrams, kernel={request.params.kernel}")

    try:
        diagrams: List[PersistenceDiagram] = [to_diagram(d, request.essential) for d in request.diagrams]
        matrix = gram(diagrams, request.params, n_jobs=1)
        return {
            "status": "success",
            "kernel": request.params.kernel,
            "values": matrix.values.tolist(),
        }
    except Exception as e:
        logger.error(f"gram failed: {e}", exc_info=True)
        return error_body(e)


@app.post("/api/kfdr", response_model=KfdrResult, response_model_exclude_unset=True, tags=["change points"])
def api_kfdr(request: KfdrRequest) -> Dict[str, Any]:
    """
    KFDR scores of a diagram sequence under the PF kernel, with the estimated change point.
    """
    logger.info(f"kfdr request: {len(request.diagrams)} diagrams, gamma={request.gamma}")

    try:
        diagrams = [to_diagram(d, request.essential) for d in request.diagrams]
        matrix = gram(diagrams, request.params, n_jobs=1)
        scores = kfdr_scan(matrix, KfdrConfig(gamma=request.gamma))
        return {
            "status": "success",
            "scores": [[tau, score] for tau, score in scores],
            "change_point": kfdr_argmax(scores),
        }
    except Exception as e:
        logger.error(f"kfdr failed: {e}", exc_info=True)
        return error_body(e)


def run(host: str = "0.0.0.0", port: int = 8000) -> None:
    logger.info(f"starting server on {host}:{port}")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    run()
