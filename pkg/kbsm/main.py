"""FastAPI application entry point."""

import uvicorn
from fastapi import FastAPI

from kbsm import __version__
from kbsm.api import api_router
from kbsm.errors import setup_error_handlers
from kbsm.logging_conf import setup_logging
from kbsm.metrics import setup_metrics
from kbsm.middleware import RequestContextMiddleware
from kbsm.settings import get_settings


def create_app() -> FastAPI:
    """Create and configure the FastAPI application."""
    settings = get_settings()
    app = FastAPI(
        title=settings.app_name,
        description="Run, enumerate and compare conventional and KBS SECD machines",
        version=__version__,
        docs_url="/docs" if settings.debug else None,
        redoc_url="/redoc" if settings.debug else None,
    )

    app.add_middleware(RequestContextMiddleware)

    if settings.metrics_enabled:
        setup_metrics(app)

    setup_error_handlers(app)
    app.include_router(api_router, prefix="/api/v1")

    @app.get("/health")
    async def health_check() -> dict[str, str]:
        """Health check endpoint."""
        return {"status": "healthy", "version": __version__}

    return app


app = create_app()


def serve(host: str | None = None, port: int | None = None) -> None:
    """Run the HTTP surface with uvicorn."""
    settings = get_settings()
    setup_logging()
    uvicorn.run(
        "kbsm.main:app",
        host=host or settings.host,
        port=port or settings.port,
        reload=settings.debug,
        log_level=settings.log_level.lower(),
    )
