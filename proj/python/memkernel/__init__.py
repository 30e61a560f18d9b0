# Copyright 2026 The memkernel Authors
# SPDX-License-Identifier: Apache-2.0

"""memkernel: an in-process gateway and the wire codec used by clients."""

from __future__ import annotations

import json
from typing import Any, Optional

from ._memkernel import Gateway as _NativeGateway
from ._memkernel import NativeError, Server
from .errors import CODES, MemkernelError, error_for
from .wire import Request, Response, canonical

__all__ = ["CODES", "Gateway", "MemkernelError", "NativeError", "Request", "Response",
           "Server", "canonical", "error_for"]


class Gateway:
    """A gateway running in this process.

    ``config`` is a deployment config as a dict; ``path`` names a config file.
    """

    def __init__(self, config: Optional[dict] = None, *, path: Optional[str] = None):
        text = json.dumps(config) if config is not None else None
        self.native = _NativeGateway(text, path)

    def handle(self, envelope: str | bytes) -> str:
        return self.native.handle(envelope)

    def send(self, request: Request) -> Response:
        return Response.decode(self.native.handle(request.encode()))

    def call(self, op: str, args: Optional[dict] = None, **fields: Any) -> Any:
        return self.send(Request(op=op, args=args or {}, **fields)).result()

    def ops(self) -> list[str]:
        return self.native.ops()

    def serve(self, host: str = "127.0.0.1", port: int = 0) -> tuple[Server, int]:
        server = Server(self.native)
        return server, server.start(host, port)
