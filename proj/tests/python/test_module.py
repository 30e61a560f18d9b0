# Copyright 2026 The memkernel Authors
# SPDX-License-Identifier: Apache-2.0

import base64
import json
import threading
import urllib.request

import pytest

import memkernel
from memkernel import errors

CONFIG = {"deployment_id": "py", "namespaces": [{"name": "default"}], "id_seed": 3}


def post(port, op, body):
    req = urllib.request.Request(f"http://127.0.0.1:{port}/v1/{op}", data=body.encode(),
                                 headers={"Content-Type": "application/json"}, method="POST")
    with urllib.request.urlopen(req, timeout=30) as r:
        return r.read().decode()


def test_error_catalogue_is_closed():
    assert len(memkernel.CODES) == 35
    assert memkernel.CODES[0] == "INVALID_PAYLOAD"
    assert errors.VersionConflict.code == "VERSION_CONFLICT"
    with pytest.raises(ValueError):
        memkernel.error_for("NOPE")


def test_canonical_matches_gateway_encoding():
    gw = memkernel.Gateway(CONFIG)
    raw = gw.handle(memkernel.Request(op="ops", id="x").encode())
    assert memkernel.canonical(json.loads(raw)) == raw
    assert memkernel.canonical({"b": 1, "a": [True, None]}) == '{"a":[true,null],"b":1}'


def test_create_get_and_stale_update():
    gw = memkernel.Gateway(CONFIG)
    cube = gw.call("create", {"namespace": "default", "text": "budget review"}, actor="alice")
    assert gw.call("get", {"id": cube["cube_id"]}, actor="alice")["payload"]["text"] == "budget review"
    with pytest.raises(errors.AccessDenied):
        gw.call("get", {"id": cube["cube_id"]}, actor="mallory")

    ok = gw.send(memkernel.Request(op="update", actor="alice", args={
        "id": cube["cube_id"], "mode": "Append", "content": "q3", "expected_version": 1}))
    assert ok.result() == {"version": 2}
    stale = gw.send(memkernel.Request(op="update", actor="alice", args={
        "id": cube["cube_id"], "mode": "Append", "content": "again", "expected_version": 1}))
    with pytest.raises(errors.VersionConflict) as err:
        stale.result()
    # One attempt only: exactly one audit record after the successful update.
    assert err.value.audit_seq == ok.audit_seq + 1


def test_handle_never_raises_on_garbage():
    gw = memkernel.Gateway(CONFIG)
    for junk in [b"", b"\xff\xfe", b"{", b"[]", b'{"op": 3}', "☃".encode()]:
        r = memkernel.Response.decode(gw.handle(junk))
        assert not r.ok and r.code in memkernel.CODES


def test_native_errors_carry_codes():
    with pytest.raises(memkernel.NativeError) as err:
        memkernel.Gateway({"deployment_id": "x", "bogus": 1})
    assert err.value.args[0] == "INVALID_CONFIG"


def wire_script():
    """Requests covering the client-facing ops, in an order where each can succeed."""
    trace = {"sessions": [{"id": "s", "turns": [
        {"at": 0, "remember": {"label": "n", "text": "locker code 4417", "tags": []}},
        {"at": 5, "prompt": "what is my locker code", "relevant": ["n"]}]}]}
    yield "create", {"namespace": "default", "text": "budget review for march", "tags": ["fin"]}
    yield "create", {"namespace": "default", "text": "vendor contract risk", "tags": ["legal"]}
    yield "list", {"namespace": "default"}
    yield "query_structured", {"filter": {"tags": "fin OR legal"}}
    yield "query_semantic", {"text": "budget", "k": 20}
    yield "query_hybrid", {"filter": {"tags": "fin"}, "text": "march budget", "k": 5}
    yield "update", {"id": "$0", "mode": "Append", "content": "approved", "expected_version": 1}
    yield "update", {"id": "$0", "mode": "Append", "content": "stale", "expected_version": 1}
    yield "pipeline_run", {"spec": {"steps": [
        {"name": "find", "op": "Retrieve", "args": {"query": "budget", "k": 3}},
        {"name": "tag", "op": "Augment", "args": {}}]}}
    yield "dump", {}
    yield "load", {"archive": "$dump", "namespace": "default"}
    yield "subscribe", {"subscription": {"semantic_query": "contract"}}
    yield "publish", {"id": "$1", "license": {"max_calls": 1}}
    yield "pull", {"listing_id": "$listing"}
    yield "pull", {"listing_id": "$listing"}
    yield "audit_query", {}
    yield "simulate", {"trace": trace}


def run_script(send):
    ids, out, refs = [], [], {}
    for n, (op, args) in enumerate(wire_script()):
        args = json.loads(json.dumps(args))
        for key, value in list(args.items()):
            if isinstance(value, str) and value.startswith("$"):
                ref = value[1:]
                args[key] = ids[int(ref)] if ref.isdigit() else refs[ref]
        envelope = memkernel.Request(op=op, args=args, actor="alice", id=f"w{n}").encode()
        raw = send(op, envelope)
        out.append(memkernel.canonical(json.loads(raw)))
        r = memkernel.Response.decode(raw)
        if r.ok and op == "create":
            ids.append(r.body["cube_id"])
        if r.ok and op == "dump":
            refs["dump"] = r.body["archive"]
        if r.ok and op == "publish":
            refs["listing"] = r.body["listing"]["listing_id"]
    return out


def test_wire_parity_in_process_and_http():
    local = memkernel.Gateway(CONFIG)
    remote = memkernel.Gateway(CONFIG)
    server, port = remote.serve()
    try:
        direct = run_script(lambda op, body: local.handle(body))
        wire = run_script(lambda op, body: post(port, op, body))
    finally:
        server.stop()
    assert direct == wire
    statuses = [json.loads(r)["status"] for r in direct]
    codes = [json.loads(r).get("code") for r in direct]
    assert "VERSION_CONFLICT" in codes and "LICENSE_EXHAUSTED" in codes
    assert statuses.count("Ok") == len(statuses) - 2, list(zip(statuses, codes))
    assert base64.b64decode(json.loads(direct[9])["body"]["archive"])


def test_threads_share_one_gateway():
    gw = memkernel.Gateway(CONFIG)
    seqs, lock = [], threading.Lock()

    def worker(i):
        for j in range(20):
            r = gw.send(memkernel.Request(op="create", actor="alice",
                                          args={"namespace": "default", "text": f"note {i} {j}"}))
            with lock:
                seqs.append(r.audit_seq)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(seqs) == list(range(1, 161))
