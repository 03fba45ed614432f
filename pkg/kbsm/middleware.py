"""Request middleware: request IDs and one log line per request."""

import time
import uuid
from collections.abc import Awaitable, Callable

from fastapi import Request, Response
from starlette.middleware.base import BaseHTTPMiddleware

from kbsm.logging_conf import RequestLogger

REQUEST_ID_HEADER = "X-Request-ID"

request_logger = RequestLogger()


class RequestContextMiddleware(BaseHTTPMiddleware):
    """Tag each request with an ID and log its outcome.

    A caller-supplied `X-Request-ID` is kept, otherwise a fresh one is
    generated; it is echoed on the response and appears in error bodies.
    The workbench error handlers leave the error code on `request.state`,
    so failed evaluations and checks are logged by code.
    """

    async def dispatch(
        self, request: Request, call_next: Callable[[Request], Awaitable[Response]]
    ) -> Response:
        request_id = request.headers.get(REQUEST_ID_HEADER) or uuid.uuid4().hex
        request.state.request_id = request_id
        request.state.error_code = None
        started = time.perf_counter()
        try:
            response = await call_next(request)
        except Exception as e:
            request_logger.log_crash(request.method, request.url.path, e, request_id)
            raise
        request_logger.log_request(
            request.method,
            request.url.path,
            response.status_code,
            (time.perf_counter() - started) * 1000,
            request_id=request_id,
            error_code=request.state.error_code,
        )
        response.headers[REQUEST_ID_HEADER] = request_id
        return response
