"""Model access: a chat-completions HTTP client and a gold-derived simulator.

The client speaks the common chat-completions shape (messages in,
``choices[0].message.content`` out), runs a bounded number of requests in
flight, retries with exponential backoff, and never lets one bad request
fail a batch — failed items come back flagged with empty text, which the
scorer treats as non-meaningful.

The simulator renders a pair's gold as a response and then applies seeded
corruptions (dropped mentions, perturbed reference digits, format noise,
empty output), which is how parser and scorer robustness is exercised
without any model.
"""

from __future__ import annotations

import json
import logging
import os
import random
import string
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import requests

from .errors import ConfigError
from .evaluate import split_opener
from .irpairs import IRPair, TaskKind
from .refs import EntityRef, UriMode, render_entity_ref
from .util import derive_seed

log = logging.getLogger(__name__)

ENV_ENDPOINT = "FOODSEM_ENDPOINT"
ENV_MODEL = "FOODSEM_MODEL"
ENV_API_KEY = "FOODSEM_API_KEY"


@dataclass
class GatewayConfig:
    endpoint_url: str
    model_name: str = "default"
    max_new_tokens: int = 512
    temperature: float = 0.0
    request_timeout: float = 60.0
    max_in_flight: int = 4
    max_attempts: int = 3
    backoff_base: float = 0.5
    api_key: Optional[str] = None
    transcript_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if not self.endpoint_url or not self.endpoint_url.startswith(("http://", "https://")):
            raise ConfigError(f"endpoint_url must be an http(s) URL, got {self.endpoint_url!r}")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be ≥ 1")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be ≥ 1")

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        endpoint = overrides.pop("endpoint_url", None) or os.environ.get(ENV_ENDPOINT)
        if not endpoint:
            raise ConfigError(f"no endpoint URL (flag or {ENV_ENDPOINT})")
        overrides.setdefault("model_name", os.environ.get(ENV_MODEL, "default"))
        overrides.setdefault("api_key", os.environ.get(ENV_API_KEY))
        return cls(endpoint_url=endpoint, **overrides)


@dataclass
class CompletionResult:
    instance_id: str
    text: str
    failed: bool
    attempts: int
    latency_ms: float


def _one_completion(prompt: str, config: GatewayConfig) -> tuple[str, bool, int, float]:
    """Returns (text, failed, attempts, latency_ms) for one prompt."""
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    body = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "max_tokens": config.max_new_tokens,
    }
    start = time.monotonic()
    for attempt in range(1, config.max_attempts + 1):
        try:
            resp = requests.post(
                config.endpoint_url, json=body, headers=headers, timeout=config.request_timeout
            )
            resp.raise_for_status()
            text = resp.json()["choices"][0]["message"]["content"]
            if not isinstance(text, str):
                raise ValueError("message content is not a string")
            return text, False, attempt, (time.monotonic() - start) * 1000
        except Exception as exc:
            log.debug("attempt %d failed: %s", attempt, exc)
            if attempt < config.max_attempts:
                time.sleep(config.backoff_base * 2 ** (attempt - 1))
    return "", True, config.max_attempts, (time.monotonic() - start) * 1000


def complete_batch(
    prompts: Sequence[tuple[str, str]], config: GatewayConfig
) -> list[CompletionResult]:
    """Complete (instance_id, prompt) items, preserving input order.

    Transport failures are per-item flags, never batch-fatal.  When the
    config names a transcript path, request/response records are appended
    there as replayable JSON lines.
    """
    if not prompts:
        return []
    with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
        futures = [pool.submit(_one_completion, prompt, config) for _, prompt in prompts]
        results = [
            CompletionResult(instance_id, *future.result())
            for (instance_id, _), future in zip(prompts, futures)
        ]
    if config.transcript_path:
        path = Path(config.transcript_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            for (instance_id, prompt), res in zip(prompts, results):
                fh.write(
                    json.dumps(
                        {
                            "instance_id": instance_id,
                            "prompt": prompt,
                            "response": res.text,
                            "latency_ms": round(res.latency_ms, 3),
                            "attempts": res.attempts,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    failed = sum(r.failed for r in results)
    if failed:
        log.warning("%d/%d requests failed after retries", failed, len(results))
    return results


# ---------------------------------------------------------------------------
# Simulator


@dataclass
class CorruptionProfile:
    p_drop_mention: float = 0.0
    p_corrupt_ref: float = 0.0
    p_format_noise: float = 0.0
    p_empty: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_drop_mention", "p_corrupt_ref", "p_format_noise", "p_empty"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")


def _perturb_local_id(local_id: str, rng: random.Random) -> str:
    """Change one digit of the id to a different digit."""
    digit_positions = [i for i, ch in enumerate(local_id) if ch.isdigit()]
    if not digit_positions:
        return local_id + rng.choice(string.digits)
    i = rng.choice(digit_positions)
    replacement = rng.choice([d for d in string.digits if d != local_id[i]])
    return local_id[:i] + replacement + local_id[i + 1 :]


def simulate_response(pair: IRPair, profile: CorruptionProfile) -> str:
    """Render the pair's gold as a response, corrupted per the profile.

    Deterministic in (profile.rng_seed, pair.pair_id).  With an all-zero
    profile the output parses back to the gold exactly.
    """
    if pair.gold is None:
        raise ConfigError(f"pair {pair.pair_id} has no structured gold to simulate from")
    rng = random.Random(derive_seed(profile.rng_seed, "simulate", pair.pair_id))
    if rng.random() < profile.p_empty:
        return ""

    opener, _ = split_opener(pair.response)
    uri_mode = UriMode.SHORT
    entry_sep = ", "
    if rng.random() < profile.p_format_noise:
        noise = rng.choice(("newline_entries", "drop_opener", "switch_uri_mode"))
        if noise == "newline_entries":
            entry_sep = "\n"
        elif noise == "drop_opener":
            opener = None
        else:
            uri_mode = UriMode.FULL

    if pair.task is TaskKind.NER:
        entries = [m for m in pair.gold if rng.random() >= profile.p_drop_mention]
    else:
        entries = []
        for g in pair.gold:
            if rng.random() < profile.p_drop_mention:
                continue
            refs = []
            for ref in g.refs:
                if rng.random() < profile.p_corrupt_ref:
                    ref = EntityRef(
                        ref.ontology,
                        ref.namespace,
                        _perturb_local_id(ref.local_id, rng),
                        ref.label,
                    )
                refs.append(render_entity_ref(ref, uri_mode))
            entries.append(f"{g.mention} - {'; '.join(refs)}")

    body = entry_sep.join(entries)
    prefix = f"{opener} " if opener else ""
    return f"{prefix}{body}."
