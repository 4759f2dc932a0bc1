"""Client for the edge-conditioned diffusion backend.

Wire protocol (shared with any conforming server):

    POST {endpoint}/generate
    -> {"prompt": str, "seed": int, "steps": int, "guidance_scale": float,
        "conditioning_scale": float, "edge_map_png_base64": str}
    <- {"image_png_base64": str}

The edge map travels as an 8-bit grayscale PNG; the reply is an RGB PNG of
identical dimensions. A deterministic mock backend is provided for offline
runs: its output is a pure function of (edge-map bytes, prompt, seed), a
seeded per-pixel noise field darkened at the edge pixels, so downstream
round-trip checks stay meaningful.

Failures carry a category: connect/timeout/server are retryable (with
exponential backoff), client/decode/dimension are not. A failed item is
reported to the caller for manifest accounting; it never aborts a batch.
Retries resend the same request body, so a deduplicating server sees one
logical item, and the mock is a pure function for which resubmission is a
no-op by construction.
"""

from __future__ import annotations

import base64
import io
import time
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image

from .edgemap import EdgeMap
from .errors import GenerationError

DEFAULT_STEPS = 30
DEFAULT_GUIDANCE = 7.5
DEFAULT_CONDITIONING = 1.0
DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 3


@dataclass(frozen=True, eq=False)
class RGBImage:
    """8-bit three-channel image, row-major, top-left origin."""

    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(f"expected (h, w, 3) uint8 array, got {px.dtype} shape {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def save_png(self, path) -> None:
        Image.fromarray(self.pixels, mode="RGB").save(path, format="PNG")

    @classmethod
    def load_png(cls, path) -> "RGBImage":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGB"), dtype=np.uint8))


@dataclass(frozen=True)
class GenerationRequest:
    edge_map: EdgeMap
    prompt: str
    seed: int
    steps: int = DEFAULT_STEPS
    guidance_scale: float = DEFAULT_GUIDANCE
    conditioning_scale: float = DEFAULT_CONDITIONING

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.guidance_scale < 0 or self.conditioning_scale < 0:
            raise ValueError("scales must be >= 0")


def edge_map_to_png_bytes(edge_map: EdgeMap) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(edge_map.pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def encode_request(req: GenerationRequest) -> dict:
    """Serialize a request to the JSON wire schema."""
    return {
        "prompt": req.prompt,
        "seed": req.seed,
        "steps": req.steps,
        "guidance_scale": req.guidance_scale,
        "conditioning_scale": req.conditioning_scale,
        "edge_map_png_base64": base64.b64encode(edge_map_to_png_bytes(req.edge_map)).decode("ascii"),
    }


def decode_request(body: dict) -> GenerationRequest:
    """Parse the JSON wire schema back into a request."""
    png = base64.b64decode(body["edge_map_png_base64"])
    with Image.open(io.BytesIO(png)) as im:
        pixels = np.asarray(im.convert("L"), dtype=np.uint8)
    return GenerationRequest(
        edge_map=EdgeMap(pixels),
        prompt=body["prompt"],
        seed=int(body["seed"]),
        steps=int(body["steps"]),
        guidance_scale=float(body["guidance_scale"]),
        conditioning_scale=float(body["conditioning_scale"]),
    )


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """Counter-based 64-bit mixer; stable regardless of library versions."""
    z = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


class MockDiffusionBackend:
    """Deterministic offline backend: seeded noise darkened at edge pixels."""

    def generate(self, req: GenerationRequest) -> RGBImage:
        import hashlib

        edge = req.edge_map.pixels
        h, w = edge.shape
        digest = hashlib.sha256(
            edge.tobytes() + b"\x00" + req.prompt.encode("utf-8") + b"\x00"
            + req.seed.to_bytes(8, "little", signed=True)
        ).digest()
        seed0 = np.uint64(int.from_bytes(digest[:8], "little"))

        counters = np.arange(h * w * 3, dtype=np.uint64)
        with np.errstate(over="ignore"):
            noise = (_splitmix64(counters ^ seed0) >> np.uint64(56)).astype(np.uint8)
        rgb = noise.reshape(h, w, 3)
        mask = edge == 255
        rgb[mask] = rgb[mask] // 4  # fixed darkening overlay at edge pixels
        return RGBImage(rgb)


class HttpDiffusionBackend:
    """Backend reached over the HTTP wire protocol."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                 session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def generate(self, req: GenerationRequest) -> RGBImage:
        try:
            resp = self._session.post(
                f"{self.endpoint}/generate", json=encode_request(req), timeout=self.timeout
            )
        except requests.exceptions.ConnectTimeout as exc:
            raise GenerationError("timeout", str(exc), retryable=True) from exc
        except requests.exceptions.ConnectionError as exc:
            raise GenerationError("connect", str(exc), retryable=True) from exc
        except requests.exceptions.Timeout as exc:
            raise GenerationError("timeout", str(exc), retryable=True) from exc
        except requests.exceptions.RequestException as exc:
            raise GenerationError("connect", str(exc), retryable=True) from exc

        if resp.status_code >= 500:
            raise GenerationError("server", f"HTTP {resp.status_code}", retryable=True)
        if resp.status_code != 200:
            raise GenerationError("client", f"HTTP {resp.status_code}", retryable=False)

        try:
            payload = resp.json()["image_png_base64"]
            png = base64.b64decode(payload)
            with Image.open(io.BytesIO(png)) as im:
                pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise GenerationError("decode", f"bad response payload: {exc}", retryable=False) from exc

        if pixels.shape[0] != req.edge_map.height or pixels.shape[1] != req.edge_map.width:
            raise GenerationError(
                "dimension",
                f"backend returned {pixels.shape[1]}x{pixels.shape[0]}, "
                f"expected {req.edge_map.width}x{req.edge_map.height}",
                retryable=False,
            )
        return RGBImage(pixels)


def generate_image(
    backend,
    req: GenerationRequest,
    retries: int = DEFAULT_RETRIES,
    backoff_base: float = 0.5,
) -> RGBImage:
    """Generate one image, retrying retryable failures with exponential backoff.

    Raises GenerationError (with its category) once retries are exhausted or
    on the first non-retryable failure; callers record the failed item in
    the manifest rather than aborting the batch.
    """
    attempt = 0
    while True:
        try:
            img = backend.generate(req)
        except GenerationError as exc:
            if not exc.retryable or attempt >= retries:
                raise
            time.sleep(backoff_base * (2.0 ** attempt))
            attempt += 1
            continue
        if img.height != req.edge_map.height or img.width != req.edge_map.width:
            raise GenerationError(
                "dimension",
                f"backend returned {img.width}x{img.height}, "
                f"expected {req.edge_map.width}x{req.edge_map.height}",
                retryable=False,
            )
        return img
