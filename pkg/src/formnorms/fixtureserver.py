"""Local HTTP server for fixture site corpora.

A corpus is a directory of HTML files plus a routing manifest (manifest.json)
mapping request paths to files, inline bodies, redirects, or error statuses.
The server records every request it receives, which lets tests assert the
crawler's etiquette (GET-only, no off-site fetches).
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path


class FixtureServer:
    def __init__(self, manifest: dict, root_dir=None, host: str = "127.0.0.1"):
        self.manifest = manifest
        self.root_dir = Path(root_dir) if root_dir else None
        self.requests: list[tuple[str, str]] = []
        self._host = host
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @classmethod
    def from_dir(cls, corpus_dir) -> "FixtureServer":
        corpus_dir = Path(corpus_dir)
        manifest = json.loads((corpus_dir / "manifest.json").read_text(encoding="utf-8"))
        return cls(manifest, corpus_dir)

    @classmethod
    def from_pages(cls, pages: dict[str, str],
                   host: str = "127.0.0.1") -> "FixtureServer":
        """Convenience: path -> html body, all served with status 200."""
        return cls({"routes": {path: {"html": body} for path, body in pages.items()}},
                   host=host)

    @property
    def base_url(self) -> str:
        assert self._httpd is not None, "server not started"
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def host(self) -> str:
        assert self._httpd is not None
        return self._httpd.server_address[0]

    def url(self, path: str) -> str:
        return self.base_url + path

    def start(self) -> "FixtureServer":
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def _respond(self):
                server.requests.append((self.command, self.path))
                route = server.manifest.get("routes", {}).get(self.path)
                if route is None:
                    self.send_response(server.manifest.get("default_status", 404))
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                status = route.get("status", 200)
                if "location" in route:
                    target = route["location"]
                    if target.startswith("/"):
                        target = server.base_url + target
                    self.send_response(status if status >= 300 else 302)
                    self.send_header("Location", target)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                if status >= 400:
                    self.send_response(status)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                if "file" in route:
                    assert server.root_dir is not None, "manifest uses files but no root_dir"
                    body = (server.root_dir / route["file"]).read_text(encoding="utf-8")
                else:
                    body = route.get("html", "")
                payload = body.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                if self.command != "HEAD":
                    self.wfile.write(payload)

            do_GET = _respond
            do_HEAD = _respond
            do_POST = _respond

        self._httpd = ThreadingHTTPServer((self._host, 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def __enter__(self) -> "FixtureServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
