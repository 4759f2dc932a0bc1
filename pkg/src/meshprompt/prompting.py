"""Text prompt assembly: template + class name + keywords + optional
LLM-generated scene description.

A prompt starts from a template containing the placeholder ``{w}`` (for
example "a photo of {w}"), substitutes the class name, then appends the
CAD keywords and, when available, a one-sentence scene description from a
language model. The description service is reached over HTTP
(POST ``{endpoint}``, JSON body ``{"instruction", "max_tokens", "seed"}``,
JSON reply ``{"text"}``); a deterministic mock client backed by a built-in
description bank keeps the pipeline fully offline-capable. When the
service is unavailable the pipeline degrades to the simple prompt.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass

import requests

from .errors import DescriptionUnavailableError, PromptError

MAX_PROMPT_CHARS = 500

DEFAULT_TEMPLATE = "a photo of {w}"

DEFAULT_INSTRUCTION = (
    "Write a one-sentence description of a plausible scene for an image of"
    " {subject}, mentioning background, colors, or weather. Context tags:"
    " {tags}."
)

# Scene descriptions spanning backgrounds, weather, and colors, used by the
# offline mock in place of a live language model.
DESCRIPTION_BANK: tuple[str, ...] = (
    "standing in tall savanna grass at dusk",
    "on a rain-slicked city street under neon signs",
    "in a sunlit meadow dotted with yellow wildflowers",
    "against a backdrop of snow-capped mountains at dawn",
    "on a weathered wooden dock beside calm gray water",
    "under a stormy violet sky with distant lightning",
    "in a cozy room lit by warm orange lamplight",
    "on a sandy beach with turquoise waves rolling in",
    "surrounded by autumn leaves in deep red and gold",
    "in a misty pine forest just after sunrise",
    "on a cracked desert flat under a blazing noon sun",
    "beside a brick wall covered in green ivy",
    "in a busy open-air market strung with paper lanterns",
    "on a frosty field under a pale winter sun",
    "against rolling vineyard hills in late afternoon light",
    "in shallow water reflecting a pink evening sky",
    "on a mossy stone path winding through a garden",
    "under cherry trees shedding white blossoms",
    "in an industrial yard with rusted orange containers",
    "on a quiet country road lined with poplars",
    "against a deep blue twilight with the first stars out",
    "in a greenhouse full of hanging ferns and fog",
    "on a rooftop terrace overlooking a hazy skyline",
    "beside a campfire throwing flickering amber light",
    "in a snowstorm with thick flakes blurring the background",
    "on a gravel shore of a glacial teal lake",
    "under golden-hour light with long soft shadows",
    "in a narrow alley painted with colorful murals",
    "on a foggy moor with heather in muted purple",
    "beside a red barn under a clear cornflower sky",
    "in a flooded rice paddy mirroring white clouds",
    "on a cobblestone plaza wet from recent rain",
    "against sand dunes rippled by a dry wind",
    "in a birch grove with sunlight filtering through",
    "on a pier at night lit by a string of bulbs",
    "under monsoon clouds heavy and slate gray",
    "in a lavender field stretching to the horizon",
    "on a frozen pond ringed by bare black trees",
    "beside a turquoise tiled fountain at midday",
    "in a dim workshop lit by a single skylight",
    "on a hillside of dry golden grass in high summer",
    "against a chalk-white cliff above a green sea",
    "in a courtyard shaded by an old olive tree",
    "on a muddy trail after a warm spring shower",
    "under a rainbow arcing over distant wheat fields",
    "in a hangar with cool fluorescent lighting",
    "on a terrace of terracotta pots and climbing roses",
    "beside train tracks disappearing into evening haze",
    "in a canyon of banded orange and cream rock",
    "on fresh snow sparkling under a hard blue sky",
    "against a harbor crowded with white sails",
    "in a library corner of dark wood and green glass lamps",
    "on a volcanic black-sand beach under silver clouds",
    "beside a field of sunflowers facing the morning sun",
    "in a subway station of polished concrete and steel",
    "under northern lights shifting green and violet",
)


@dataclass(frozen=True)
class Prompt:
    """A fully rendered text prompt plus the parts it was built from."""

    template: str
    class_name: str
    keywords: tuple[str, ...]
    llm_description: str | None
    rendered: str


def _normalize(text: str) -> str:
    text = re.sub(r"\s+", " ", text).strip()
    text = re.sub(r"(,\s*)+,", ",", text)  # collapse comma runs
    text = re.sub(r",(?=\S)", ", ", text)
    return text.strip(" ,")


def _clean_keyword(kw: str) -> str:
    return re.sub(r"[,\s]+", " ", kw).strip()


def build_prompt(
    template: str,
    class_name: str,
    keywords=(),
    description: str | None = None,
) -> Prompt:
    """Assemble the final prompt string.

    The class name replaces ``{w}`` in the template (appended if the
    placeholder is missing), keywords follow comma-separated, then the
    description. Output is whitespace-normalized and capped at 500
    characters, truncating the description first.
    """
    # commas are structural separators in the rendered prompt, so they are
    # stripped from the class name just like from keywords
    class_name = _clean_keyword(class_name or "")
    if not class_name:
        raise PromptError("class name must be non-empty")

    if "{w}" in template:
        base = template.replace("{w}", class_name)
    else:
        base = f"{template.rstrip()} {class_name}"
    kws = [k for k in (_clean_keyword(k) for k in keywords) if k]
    if kws:
        base = base + ", " + ", ".join(kws)
    base = _normalize(base)
    if len(base) > MAX_PROMPT_CHARS:
        base = _normalize(base[:MAX_PROMPT_CHARS])
        if class_name not in base:
            raise PromptError(
                f"prompt exceeds {MAX_PROMPT_CHARS} chars before the class name fits"
            )

    rendered = base
    desc = description.strip() if description else None
    if desc:
        room = MAX_PROMPT_CHARS - len(base) - 2
        if room > 0:
            rendered = _normalize(base + ", " + desc[:room])

    return Prompt(
        template=template,
        class_name=class_name,
        keywords=tuple(kws),
        llm_description=desc,
        rendered=rendered,
    )


def _format_instruction(instruction_template: str, template: str, class_name: str, keywords) -> str:
    subject = build_prompt(template, class_name, keywords).rendered
    tags = ", ".join(keywords) if keywords else "none"
    return instruction_template.format(subject=subject, tags=tags)


class MockLLMClient:
    """Offline stand-in: picks deterministically from DESCRIPTION_BANK.

    The pick is keyed by a stable digest of (seed, class name), so the same
    seed and subject always give the same description while different seeds
    spread across the bank.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def with_seed(self, seed: int) -> "MockLLMClient":
        return MockLLMClient(seed)

    def describe(self, instruction: str, subject: str) -> str:
        digest = hashlib.sha256(f"{self.seed}|{subject}".encode()).digest()
        index = int.from_bytes(digest[:8], "big") % len(DESCRIPTION_BANK)
        return DESCRIPTION_BANK[index]


class HttpLLMClient:
    """HTTP client for the description service, with an in-flight cap."""

    def __init__(
        self,
        endpoint: str,
        seed: int = 0,
        timeout: float = 30.0,
        max_tokens: int = 64,
        max_in_flight: int = 4,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.seed = int(seed)
        self.timeout = timeout
        self.max_tokens = max_tokens
        self._gate = threading.Semaphore(max_in_flight)
        self._session = session or requests.Session()

    def with_seed(self, seed: int) -> "HttpLLMClient":
        clone = HttpLLMClient.__new__(HttpLLMClient)
        clone.__dict__.update(self.__dict__)
        clone.seed = int(seed)
        return clone

    def describe(self, instruction: str, subject: str) -> str:
        body = {"instruction": instruction, "max_tokens": self.max_tokens, "seed": self.seed}
        with self._gate:
            try:
                resp = self._session.post(self.endpoint, json=body, timeout=self.timeout)
            except requests.exceptions.RequestException as exc:
                raise DescriptionUnavailableError(f"LLM endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise DescriptionUnavailableError(f"LLM endpoint returned HTTP {resp.status_code}")
        try:
            text = resp.json()["text"]
        except (ValueError, KeyError) as exc:
            raise DescriptionUnavailableError(f"malformed LLM response: {exc}") from exc
        if not isinstance(text, str):
            raise DescriptionUnavailableError("malformed LLM response: 'text' is not a string")
        return text


def request_description(
    client,
    template: str,
    class_name: str,
    keywords=(),
    instruction_template: str = DEFAULT_INSTRUCTION,
) -> str:
    """Ask the language model for a one-sentence scene description.

    Raises DescriptionUnavailableError when the client cannot deliver;
    callers then fall back to the simple prompt without a description.
    """
    instruction = _format_instruction(instruction_template, template, class_name, keywords)
    return client.describe(instruction, class_name)
