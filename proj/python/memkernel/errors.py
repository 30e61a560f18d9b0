# Copyright 2026 The memkernel Authors
# SPDX-License-Identifier: Apache-2.0

"""Exception classes for the closed error catalogue."""

from __future__ import annotations

from . import _memkernel


class MemkernelError(Exception):
    """An Err envelope. ``code`` is the wire name, e.g. ``VERSION_CONFLICT``."""

    code = "INTERNAL"

    def __init__(self, message: str = "", *, audit_seq: int = 0, request_id: str = ""):
        super().__init__(message)
        self.message = message
        self.audit_seq = audit_seq
        self.request_id = request_id

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def _class_name(code: str) -> str:
    return "".join(part.capitalize() for part in code.split("_"))


CODES: tuple[str, ...] = tuple(_memkernel.error_codes())
BY_CODE: dict[str, type[MemkernelError]] = {}

for _code in CODES:
    _cls = type(_class_name(_code), (MemkernelError,), {"code": _code})
    BY_CODE[_code] = _cls
    globals()[_cls.__name__] = _cls


def error_for(code: str) -> type[MemkernelError]:
    try:
        return BY_CODE[code]
    except KeyError:
        raise ValueError(f"not in the error catalogue: {code}") from None
