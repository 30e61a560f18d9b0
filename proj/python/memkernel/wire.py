# Copyright 2026 The memkernel Authors
# SPDX-License-Identifier: Apache-2.0

"""Request/response envelopes of the gateway protocol.

A request is canonical JSON::

    {"id": "r1", "actor": "alice", "op": "query_semantic",
     "context": {"session_id": "s1", "purpose": "", "platform": "", "time": null},
     "args": {"text": "budget", "k": 20}}

with optional ``idempotency_key`` and ``now``. A response carries ``status``
(``Ok`` or ``Err``), ``body``, ``audit_seq`` and, on error, ``code`` and
``message``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from . import _memkernel
from .errors import error_for

_ids = itertools.count(1)


def canonical(obj: Any) -> str:
    """Canonical encoding: the byte form the gateway itself emits."""
    return _memkernel.canonical(json.dumps(obj, ensure_ascii=False))


@dataclass
class Request:
    op: str
    args: dict = field(default_factory=dict)
    actor: str = "user"
    session_id: str = "py"
    purpose: str = ""
    platform: str = ""
    time: Optional[str] = None
    idempotency_key: Optional[str] = None
    now: Optional[str] = None
    id: str = ""

    def to_json(self) -> dict:
        j = {
            "id": self.id or f"py-{next(_ids)}",
            "actor": self.actor,
            "op": self.op,
            "context": {"session_id": self.session_id, "purpose": self.purpose,
                        "platform": self.platform, "time": self.time},
            "args": self.args,
        }
        if self.idempotency_key is not None:
            j["idempotency_key"] = self.idempotency_key
        if self.now is not None:
            j["now"] = self.now
        return j

    def encode(self) -> str:
        return canonical(self.to_json())


@dataclass
class Response:
    id: str
    ok: bool
    body: Any
    audit_seq: int
    code: Optional[str] = None
    message: str = ""

    @classmethod
    def decode(cls, text: str | bytes) -> "Response":
        j = json.loads(text)
        if not isinstance(j, dict) or j.get("status") not in ("Ok", "Err"):
            raise ValueError("not a response envelope")
        return cls(id=j.get("id", ""), ok=j["status"] == "Ok", body=j.get("body"),
                   audit_seq=int(j.get("audit_seq", 0)), code=j.get("code"),
                   message=j.get("message", ""))

    def result(self) -> Any:
        """The body, or the catalogue exception for an Err envelope."""
        if self.ok:
            return self.body
        raise error_for(self.code or "INTERNAL")(self.message, audit_seq=self.audit_seq,
                                                 request_id=self.id)
