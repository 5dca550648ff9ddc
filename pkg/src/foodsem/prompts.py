"""Few-shot prompt construction for baseline (non-fine-tuned) models.

A 0-shot prompt is the bare instruction.  For n ≥ 1, the prompt shows n
question/answer exemplars drawn (seeded, without replacement) from training
pairs matching the target's task and ontology, a bridging sentence, and the
target question.  Exemplar NEL answers are re-rendered from gold so the
reference style (short ids vs. full URIs) is uniform across the prompt.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InsufficientExemplars
from .evaluate import split_opener
from .irpairs import IRPair, TaskKind, render_nel_response
from .refs import Ontology, UriMode
from .util import derive_seed

HEADER = "The following are examples of questions (with answers) about nutrition."
BRIDGE = "Respond to the following question in the same manner as seen in the examples above."

_FALLBACK_OPENER = "Certainly, the entities are associated properly:"


@dataclass
class NShotPrompt:
    n: int
    task: TaskKind
    ontology: Optional[Ontology]
    exemplars: list[IRPair]
    body: str


def _exemplar_answer(pair: IRPair, uri_mode: UriMode) -> str:
    """The exemplar's answer text, NEL refs re-rendered in the asked style."""
    if pair.task is TaskKind.NEL and pair.gold:
        opener, _ = split_opener(pair.response)
        return render_nel_response(opener or _FALLBACK_OPENER, pair.gold, uri_mode)
    return pair.response


def build_nshot_prompt(
    target_instruction: str,
    task: TaskKind,
    ontology: Optional[Ontology],
    n: int,
    exemplar_pool: Sequence[IRPair],
    rng_seed: int = 0,
    uri_mode: UriMode = UriMode.FULL,
) -> NShotPrompt:
    """Build the prompt body for one target instruction.

    Exemplars must match (task, ontology); the target itself never appears
    among them.  Raises :class:`InsufficientExemplars` when fewer than n
    matching pairs exist.
    """
    if n == 0:
        return NShotPrompt(n=0, task=task, ontology=ontology, exemplars=[], body=target_instruction)

    matching = [
        p
        for p in exemplar_pool
        if p.task is task and p.ontology is ontology and p.instruction != target_instruction
    ]
    if len(matching) < n:
        raise InsufficientExemplars(
            f"need {n} exemplars for ({task.value}, "
            f"{ontology.value if ontology else '-'}), found {len(matching)}"
        )
    rng = random.Random(
        derive_seed(rng_seed, "prompt", task.value, ontology.value if ontology else "", target_instruction)
    )
    exemplars = rng.sample(matching, n)

    lines = [HEADER]
    lines.extend(
        f"Question: {ex.instruction} Answer: {_exemplar_answer(ex, uri_mode)}"
        for ex in exemplars
    )
    lines.append(BRIDGE)
    lines.append(f"Question: {target_instruction} Answer:")
    return NShotPrompt(
        n=n, task=task, ontology=ontology, exemplars=exemplars, body="\n".join(lines)
    )
