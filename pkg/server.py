from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from settings import TOOL_NAME, TOOL_VERSION

from decomposable_model import DecomposableMatrices, SwitchedMas, consensus_example
from graphs import Graph, GraphError, GraphFamily, laplacian, spectral_bounds, spectrum, validate_family
from lmi_analysis import NoCertificate, SpectralRadiusError, solve_h2_bound


app = FastAPI(title="Multi-agent H2 analysis API", version=TOOL_VERSION)


class BlocksPayload(BaseModel):
    n_x: int = Field(ge=1)
    n_w: int = Field(ge=1)
    n_z: int = Field(ge=1)
    blocks: dict[str, list[list[float]]] = Field(description='Keys "A_d" ... "D_p"; missing blocks are zero')


class AnalyzeRequest(BaseModel):
    n_agents: int = Field(ge=1)
    p: float = Field(ge=0, le=1, description="Transmission probability")
    lambda_lo: float = Field(gt=0)
    lambda_hi: float = Field(gt=0)
    deflated: bool = False
    example: Optional[Literal["consensus", "swapped"]] = None
    kappa: float = 0.1
    blocks: Optional[BlocksPayload] = None


class AnalyzeResponse(BaseModel):
    h2_bound: float
    gamma: float
    beta: float
    deflated: bool
    epsilon: float
    Q: list[list[float]]
    Z1: list[list[float]]
    Z2: Optional[list[list[float]]] = None
    residuals: dict[str, float]


class SpectrumRequest(BaseModel):
    n_agents: int = Field(ge=2)
    graphs: list[list[tuple[int, int]]] = Field(min_length=1, description="Edge lists with 1-based vertices")
    lambda_lo: Optional[float] = None
    lambda_hi: Optional[float] = None


class GraphSpectrum(BaseModel):
    index: int
    eigenvalues: list[float]
    lambda_2: float
    lambda_n: float
    connected: bool
    inside: bool


class SpectrumResponse(BaseModel):
    graphs: list[GraphSpectrum]
    lambda_lo: float
    lambda_hi: float
    tightest_lo: float
    tightest_hi: float
    passed: bool


def _blocks(request: AnalyzeRequest) -> DecomposableMatrices:
    if request.example is not None:
        return consensus_example(request.kappa, swapped=request.example == "swapped")
    if request.blocks is None:
        raise ValueError("Give either 'example' or 'blocks'")
    payload = request.blocks
    return DecomposableMatrices(payload.n_x, payload.n_w, payload.n_z, payload.blocks)


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(request: AnalyzeRequest):
    """
    Certify an H2 bound from the agent-count independent conditions
    """
    try:
        mas = SwitchedMas.from_bounds(
            request.n_agents, request.lambda_lo, request.lambda_hi, request.p, _blocks(request)
        )
        cert = solve_h2_bound(mas, deflated=request.deflated)
    except NoCertificate as e:
        raise HTTPException(status_code=422, detail=f"No certificate: {e}")
    except (SpectralRadiusError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))

    return AnalyzeResponse(
        h2_bound=cert.h2_bound,
        gamma=cert.gamma,
        beta=cert.beta,
        deflated=cert.deflated,
        epsilon=cert.epsilon,
        Q=cert.Q.tolist(),
        Z1=cert.Z1.tolist(),
        Z2=None if cert.Z2 is None else cert.Z2.tolist(),
        residuals=cert.residuals,
    )


@app.post("/spectrum", response_model=SpectrumResponse)
def graph_spectrum(request: SpectrumRequest):
    """
    Laplacian spectra of posted graphs and the check of the claimed interval
    """
    try:
        graphs = tuple(Graph.from_edges(request.n_agents, edges) for edges in request.graphs)
        lo, hi = spectral_bounds(graphs)
        family = GraphFamily(
            graphs,
            request.lambda_lo if request.lambda_lo is not None else lo,
            request.lambda_hi if request.lambda_hi is not None else hi,
        )
        report = validate_family(family)
    except (GraphError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))

    return SpectrumResponse(
        graphs=[
            GraphSpectrum(
                index=r.index,
                eigenvalues=spectrum(laplacian(g)).tolist(),
                lambda_2=r.lambda_2,
                lambda_n=r.lambda_n,
                connected=r.connected,
                inside=r.inside,
            )
            for r, g in zip(report.graphs, graphs)
        ],
        lambda_lo=report.lambda_lo,
        lambda_hi=report.lambda_hi,
        tightest_lo=report.tightest_lo,
        tightest_hi=report.tightest_hi,
        passed=report.passed,
    )


@app.get("/")
async def root():
    """
    Root endpoint with API information
    """
    return {
        "message": f"{TOOL_NAME} {TOOL_VERSION}",
        "endpoints": {
            "POST /analyze": "Certified H2 bound for the consensus examples or explicit blocks",
            "POST /spectrum": "Laplacian spectra and interval check for a graph family",
            "GET /docs": "API documentation",
        },
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
