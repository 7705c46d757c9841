"""
Stieltjes Calculus Service - FastAPI Application
HTTP surface over the integration, variation, mollification and ODE engines
"""

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from contextlib import asynccontextmanager
from datetime import datetime
import importlib
import time

from app.config import settings
from app.schemas.responses import ErrorResponse
from app.services.document_loader import document_loader
from app.utils.errors import CalculusError
from app.utils.logger import logger

# Import routers
from app.routers import health, integrals, variation, mollify, ode


ENGINES = ("quadrature", "funcrep", "variation", "rs_engine", "star_engine", "mollify", "qde")

# Startup time tracking
startup_time = time.time()


def load_engines() -> dict:
    status = {}
    for name in ENGINES:
        try:
            importlib.import_module(f"app.models.{name}")
            status[name] = True
        except ImportError as e:
            logger.error(f"❌ Engine {name} failed to import: {e}")
            status[name] = False
    return status


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Application lifespan events
    Import engines and warm the document cache at startup
    """
    logger.info("="*60)
    logger.info(f"🚀 Starting {settings.app_name} v{settings.app_version}")
    logger.info(f"🌍 Environment: {settings.environment}")
    logger.info("="*60)

    engines = load_engines()
    if not all(engines.values()):
        logger.error("❌ Some engines failed to load! Service may not work properly.")

    app.state.engines_loaded = engines
    app.state.fixtures = document_loader.load_directory(settings.fixtures_dir)
    app.state.startup_time = startup_time

    logger.info("✅ Application startup complete!")

    yield

    logger.info("🛑 Shutting down calculus service...")
    document_loader.clear()


# Create FastAPI app
app = FastAPI(
    title=settings.app_name,
    version=settings.app_version,
    description="Riemann-Stieltjes and *-integrals, variation, mollification and measure-coefficient ODEs",
    docs_url="/docs",
    redoc_url="/redoc",
    lifespan=lifespan
)


# CORS Middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Request logging middleware
@app.middleware("http")
async def log_requests(request: Request, call_next):
    """Log all incoming requests with timing"""

    start_time = time.time()
    logger.info(f"📥 {request.method} {request.url.path}")

    response = await call_next(request)

    duration = time.time() - start_time
    logger.info(f"📤 {request.method} {request.url.path} - {response.status_code} ({duration:.3f}s)")
    response.headers["X-Process-Time"] = f"{duration:.3f}"

    return response


@app.exception_handler(CalculusError)
async def calculus_exception_handler(request: Request, exc: CalculusError):
    """Validation 422, nonexistent integral 409, exhausted budget 503"""

    log = logger.error if exc.http_status >= 500 else logger.warning
    log(f"❌ {request.url.path}: {exc.error_code} {exc.detail}")

    body = ErrorResponse(detail=exc.detail, error_code=exc.error_code, loc=exc.loc, pointer=exc.pointer)
    return JSONResponse(status_code=exc.http_status, content=body.model_dump(mode="json"))


# Global exception handler
@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Handle uncaught exceptions"""

    logger.error(f"❌ Unhandled exception: {exc}", exc_info=True)

    return JSONResponse(
        status_code=500,
        content={
            "detail": "Internal server error",
            "error_code": "INTERNAL_ERROR",
            "timestamp": datetime.utcnow().isoformat()
        }
    )


# Include routers
app.include_router(health.router, tags=["Health Check"])
app.include_router(integrals.router, prefix="/integrals", tags=["Integrals"])
app.include_router(variation.router, prefix="/variation", tags=["Variation"])
app.include_router(mollify.router, prefix="/mollify", tags=["Mollification"])
app.include_router(ode.router, prefix="/ode", tags=["ODE"])


# Root endpoint
@app.get("/", include_in_schema=False)
async def root():
    """Root endpoint - redirect to docs"""
    return {
        "message": "Stieltjes Calculus Service API",
        "version": settings.app_version,
        "docs": "/docs",
        "health": "/health"
    }


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "app.main:app",
        host=settings.host,
        port=settings.port,
        reload=settings.reload,
        log_level=settings.log_level.lower()
    )
