"""External-service client contracts and implementations.

VlmClient: (image bytes, prompt text) -> reply text.
OcrClient: (image bytes, optional region) -> (text, bbox, confidence) rows.

Two families ship: HTTP adapters configured from the environment, and a
record/replay fixture store keyed by request hash so the test suite never
touches the network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import subprocess
import tempfile
import time
from pathlib import Path
from typing import Protocol, runtime_checkable

from .errors import ClientUnavailable

ENV_VLM_URL = "CHART2SVG_VLM_URL"
ENV_VLM_TOKEN = "CHART2SVG_VLM_TOKEN"
ENV_OCR_CMD = "CHART2SVG_OCR_CMD"
ENV_FIXTURES = "CHART2SVG_FIXTURES"


@runtime_checkable
class VlmClient(Protocol):
    def complete(self, image_bytes: bytes, prompt: str) -> str: ...


@runtime_checkable
class OcrClient(Protocol):
    def recognize(self, image_bytes: bytes, region) -> list[tuple[str, tuple, float]]: ...


def request_key(prompt: str, image_bytes: bytes) -> str:
    digest = hashlib.sha256()
    digest.update(prompt.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(image_bytes)
    return digest.hexdigest()[:24]


class FixtureVlmClient:
    """Replay (and optionally record) completions from a directory of
    request-hash -> response files."""

    def __init__(self, directory: str | Path | None = None, record_from: VlmClient | None = None):
        directory = directory or os.environ.get(ENV_FIXTURES)
        if not directory:
            raise ClientUnavailable(f"no fixture directory (set {ENV_FIXTURES})")
        self.directory = Path(directory)
        self.record_from = record_from

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.txt"

    def complete(self, image_bytes: bytes, prompt: str) -> str:
        key = request_key(prompt, image_bytes)
        path = self._path(key)
        if path.exists():
            return path.read_text(encoding="utf-8")
        if self.record_from is not None:
            reply = self.record_from.complete(image_bytes, prompt)
            self.directory.mkdir(parents=True, exist_ok=True)
            path.write_text(reply, encoding="utf-8")
            return reply
        raise ClientUnavailable(f"no fixture for request {key}")

    def store(self, image_bytes: bytes, prompt: str, reply: str) -> Path:
        """Pre-seed a fixture (test setup helper)."""
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self._path(request_key(prompt, image_bytes))
        path.write_text(reply, encoding="utf-8")
        return path


class HttpVlmClient:
    """JSON-over-HTTP adapter. Request: {prompt, image_base64}; reply body:
    {text: ...}. Endpoint and bearer token come from the environment unless
    given explicitly. Retries three times with exponential backoff."""

    def __init__(
        self,
        url: str | None = None,
        token: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
    ):
        self.url = url or os.environ.get(ENV_VLM_URL)
        self.token = token if token is not None else os.environ.get(ENV_VLM_TOKEN)
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        if not self.url:
            raise ClientUnavailable(f"no endpoint configured (set {ENV_VLM_URL})")

    def complete(self, image_bytes: bytes, prompt: str) -> str:
        import requests

        body = {
            "prompt": prompt,
            "image_base64": base64.b64encode(image_bytes).decode("ascii"),
        }
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
                if resp.status_code >= 500:
                    raise ClientUnavailable(f"server error {resp.status_code}")
                resp.raise_for_status()
                return str(resp.json()["text"])
            except Exception as exc:  # noqa: BLE001 - transport policy lives here
                last = exc
                if attempt + 1 < self.max_attempts:
                    time.sleep(self.backoff * (2**attempt))
        raise ClientUnavailable(f"request failed after {self.max_attempts} attempts: {last}")


class FixtureOcrClient:
    """Replay OCR results from request-hash -> JSON files."""

    def __init__(self, directory: str | Path | None = None):
        directory = directory or os.environ.get(ENV_FIXTURES)
        if not directory:
            raise ClientUnavailable(f"no fixture directory (set {ENV_FIXTURES})")
        self.directory = Path(directory)

    def _path(self, key: str) -> Path:
        return self.directory / f"ocr-{key}.json"

    def recognize(self, image_bytes: bytes, region=None) -> list[tuple[str, tuple, float]]:
        key = request_key(json.dumps(list(region) if region else None), image_bytes)
        path = self._path(key)
        if not path.exists():
            raise ClientUnavailable(f"no OCR fixture for request {key}")
        rows = json.loads(path.read_text(encoding="utf-8"))
        return [(r["text"], tuple(r["bbox"]), float(r.get("confidence", 1.0))) for r in rows]

    def store(self, image_bytes: bytes, region, rows) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        key = request_key(json.dumps(list(region) if region else None), image_bytes)
        path = self._path(key)
        path.write_text(json.dumps(rows), encoding="utf-8")
        return path


class SubprocessOcrClient:
    """Adapter for a local OCR executable.

    The command (from CHART2SVG_OCR_CMD unless given) is invoked with the
    image path, plus `--region x y w h` when a region is requested, and must
    print a JSON list of {text, bbox: [x, y, w, h], confidence} rows."""

    def __init__(self, command: str | None = None, timeout: float = 120.0):
        self.command = command or os.environ.get(ENV_OCR_CMD)
        self.timeout = timeout
        if not self.command:
            raise ClientUnavailable(f"no OCR command configured (set {ENV_OCR_CMD})")

    def recognize(self, image_bytes: bytes, region=None) -> list[tuple[str, tuple, float]]:
        with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as tmp:
            tmp.write(image_bytes)
            tmp_path = tmp.name
        argv = self.command.split() + [tmp_path]
        if region is not None:
            argv += ["--region"] + [str(int(v)) for v in region]
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=self.timeout, check=False
            )
            if proc.returncode != 0:
                raise ClientUnavailable(f"OCR command failed ({proc.returncode}): {proc.stderr.strip()}")
            rows = json.loads(proc.stdout)
            return [
                (r["text"], tuple(r["bbox"]), float(r.get("confidence", 1.0))) for r in rows
            ]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ClientUnavailable(f"unusable OCR output: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise ClientUnavailable("OCR command timed out") from exc
        finally:
            os.unlink(tmp_path)
