"""Complex Time Wick Workbench - FastAPI application entry point."""

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.api.endpoints import diagnostics, hermite, processes
from app.core.config import APP_NAME, APP_VERSION, API_V1_PREFIX
from app.services.artifacts import versions

app = FastAPI(
    title=APP_NAME,
    version=APP_VERSION,
    description="Hermite functions, chaos processes and identity checks for Brownian motion in complex time",
)

# CORS middleware - allow all origins for development
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(
    hermite.router,
    prefix=f"{API_V1_PREFIX}/hermite",
    tags=["Hermite"],
)

app.include_router(
    processes.router,
    prefix=f"{API_V1_PREFIX}/processes",
    tags=["Processes"],
)

app.include_router(
    diagnostics.router,
    prefix=f"{API_V1_PREFIX}/diagnostics",
    tags=["Diagnostics"],
)


@app.get("/")
def root():
    """Health check endpoint."""
    return {"status": "Workbench Running"}


@app.get("/health")
def health_check():
    """Service status with library versions."""
    return {
        "status": "healthy",
        "version": APP_VERSION,
        "libraries": versions(),
    }
