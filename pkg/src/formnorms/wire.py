"""Wire protocol for external page-provider adapters.

Framing: every message is a UTF-8 JSON payload preceded by its byte length
in ASCII decimal and a single ``\\n``. Requests and responses use fixed field
names; all fields are always present (``null`` when absent) so messages are
bit-exact across language boundaries.

Request:  {"op": "load"|"enumerate", "start_url": str|null,
           "clicks": [str, ...], "timeout_ms": int}
Response: {"status": "ok"|"error"|"unsupported",
           "snapshot": {"final_url", "title", "html", "lang_attr",
                        "capability"}|null,
           "clickables": [{"locator", "text", "kind", "target_url"}, ...],
           "error_detail": str|null}
"""
from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass

from .page_provider import ClickableElement, LoadResult, PageSnapshot

REQUEST_OPS = ("load", "enumerate")
RESPONSE_STATUSES = ("ok", "error", "unsupported")


class ProtocolError(ValueError):
    pass


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def encode_frame(obj: dict) -> bytes:
    payload = _dumps(obj)
    return str(len(payload)).encode("ascii") + b"\n" + payload


def read_frame(stream) -> dict | None:
    """Read one framed message; None on clean EOF."""
    header = b""
    while True:
        ch = stream.read(1)
        if not ch:
            if header:
                raise ProtocolError("EOF inside frame header")
            return None
        if ch == b"\n":
            break
        header += ch
        if len(header) > 20:
            raise ProtocolError("unreasonable frame header")
    try:
        length = int(header)
    except ValueError:
        raise ProtocolError(f"bad frame length {header!r}") from None
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise ProtocolError("EOF inside frame payload")
        payload += chunk
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad frame payload: {exc}") from None


@dataclass(frozen=True)
class AdapterRequest:
    op: str
    start_url: str | None
    clicks: tuple[str, ...]
    timeout_ms: int

    def to_wire(self) -> dict:
        return {"op": self.op, "start_url": self.start_url,
                "clicks": list(self.clicks), "timeout_ms": self.timeout_ms}

    @classmethod
    def from_wire(cls, obj: dict) -> "AdapterRequest":
        if not isinstance(obj, dict):
            raise ProtocolError("request must be an object")
        op = obj.get("op")
        if op not in REQUEST_OPS:
            raise ProtocolError(f"unknown op {op!r}")
        start_url = obj.get("start_url")
        if start_url is not None and not isinstance(start_url, str):
            raise ProtocolError("start_url must be a string or null")
        if op == "load" and not start_url:
            raise ProtocolError("op=load requires start_url")
        clicks = obj.get("clicks", [])
        if not isinstance(clicks, list) or any(not isinstance(c, str) for c in clicks):
            raise ProtocolError("clicks must be a list of strings")
        timeout_ms = obj.get("timeout_ms")
        if not isinstance(timeout_ms, int) or isinstance(timeout_ms, bool) or timeout_ms < 0:
            raise ProtocolError("timeout_ms must be a non-negative integer")
        return cls(op, start_url, tuple(clicks), timeout_ms)


@dataclass(frozen=True)
class AdapterResponse:
    status: str
    snapshot: dict | None
    clickables: tuple[dict, ...]
    error_detail: str | None

    def to_wire(self) -> dict:
        return {"status": self.status, "snapshot": self.snapshot,
                "clickables": list(self.clickables),
                "error_detail": self.error_detail}

    @classmethod
    def from_wire(cls, obj: dict) -> "AdapterResponse":
        if not isinstance(obj, dict):
            raise ProtocolError("response must be an object")
        status = obj.get("status")
        if status not in RESPONSE_STATUSES:
            raise ProtocolError(f"unknown status {status!r}")
        snapshot = obj.get("snapshot")
        if status == "ok":
            if not isinstance(snapshot, dict):
                raise ProtocolError("status=ok requires a snapshot")
            for key in ("final_url", "title", "html", "capability"):
                if not isinstance(snapshot.get(key), str):
                    raise ProtocolError(f"snapshot.{key} must be a string")
            lang = snapshot.get("lang_attr")
            if lang is not None and not isinstance(lang, str):
                raise ProtocolError("snapshot.lang_attr must be a string or null")
            snapshot = {"final_url": snapshot["final_url"], "title": snapshot["title"],
                        "html": snapshot["html"], "lang_attr": lang,
                        "capability": snapshot["capability"]}
        elif snapshot is not None:
            raise ProtocolError("snapshot only allowed with status=ok")
        raw_clickables = obj.get("clickables", [])
        if not isinstance(raw_clickables, list):
            raise ProtocolError("clickables must be a list")
        clickables = []
        for c in raw_clickables:
            if not isinstance(c, dict):
                raise ProtocolError("clickable must be an object")
            for key in ("locator", "text", "kind"):
                if not isinstance(c.get(key), str):
                    raise ProtocolError(f"clickable.{key} must be a string")
            if c["kind"] not in ("hyperlink", "button_like"):
                raise ProtocolError(f"bad clickable kind {c['kind']!r}")
            target = c.get("target_url")
            if target is not None and not isinstance(target, str):
                raise ProtocolError("clickable.target_url must be a string or null")
            if c["kind"] == "hyperlink" and target is None:
                raise ProtocolError("hyperlink clickable requires target_url")
            clickables.append({"locator": c["locator"], "text": c["text"],
                               "kind": c["kind"], "target_url": target})
        detail = obj.get("error_detail")
        if detail is not None and not isinstance(detail, str):
            raise ProtocolError("error_detail must be a string or null")
        return cls(status, snapshot, tuple(clickables), detail)

    def to_snapshot(self) -> PageSnapshot:
        assert self.snapshot is not None
        return PageSnapshot(final_url=self.snapshot["final_url"],
                            title=self.snapshot["title"],
                            html=self.snapshot["html"],
                            lang_attr=self.snapshot["lang_attr"],
                            capability=self.snapshot["capability"])

    def to_clickables(self) -> list[ClickableElement]:
        return [ClickableElement(c["locator"], c["text"], c["kind"],
                                 c["target_url"]) for c in self.clickables]


class AdapterProvider:
    """PageProvider backed by an external adapter subprocess over stdio."""

    capability = "dynamic"

    def __init__(self, command: list[str], timeout_ms: int = 30000):
        self.command = command
        self.timeout_ms = timeout_ms
        self._proc = subprocess.Popen(command, stdin=subprocess.PIPE,
                                      stdout=subprocess.PIPE)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()

    def _rpc(self, request: AdapterRequest) -> AdapterResponse:
        self._proc.stdin.write(encode_frame(request.to_wire()))
        self._proc.stdin.flush()
        obj = read_frame(self._proc.stdout)
        if obj is None:
            raise ProtocolError("adapter closed the stream")
        return AdapterResponse.from_wire(obj)

    def load(self, task) -> LoadResult:
        request = AdapterRequest("load", task.start_url, tuple(task.clicks),
                                 self.timeout_ms)
        try:
            response = self._rpc(request)
        except (ProtocolError, OSError) as exc:
            return LoadResult("network_error", detail=f"adapter: {exc}")
        if response.status == "ok":
            return LoadResult("ok", snapshot=response.to_snapshot())
        if response.status == "unsupported":
            return LoadResult("unsupported", detail=response.error_detail or "")
        return LoadResult("network_error", detail=response.error_detail or "adapter error")

    def enumerate(self, start_url: str, clicks: tuple[str, ...] = ()) -> list[ClickableElement]:
        response = self._rpc(AdapterRequest("enumerate", start_url, clicks,
                                            self.timeout_ms))
        if response.status != "ok":
            raise ProtocolError(response.error_detail or "adapter error")
        return response.to_clickables()
