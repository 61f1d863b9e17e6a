"""Turn-level artifact extraction with a second gleaning pass.

extract_turn runs the backend once, then (when gleaning is enabled) a second
time so implicit material gets a chance to surface. Both passes see a digest
of existing objects; the gleaning pass additionally sees what the first pass
produced. Candidates whose quote is not a contiguous substring of the source
message (case-insensitive, whitespace-normalized) are dropped regardless of
backend: grounding is enforced here, not trusted.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol, Sequence, runtime_checkable

from .core import CanvasGraph, CanvasObject, ObjectKind, Source, normalize_text
from .errors import BackendFailureError, SequenceError

logger = logging.getLogger(__name__)

DIGEST_CAP = 50

MARKER_RE = re.compile(r"\b(DECISION|TODO|KEY_FACT|REMINDER|INSIGHT|GLEAN):")
GLEAN_MARKER = "GLEAN"


class ExtractionPass(str, Enum):
    FIRST = "FIRST"
    GLEAN = "GLEAN"


@dataclass
class ConversationTurn:
    """One user/assistant exchange. At least one side must say something."""

    index: int
    user_text: str = ""
    assistant_text: str = ""
    timestamp: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.index, int) or isinstance(self.index, bool) or self.index < 0:
            raise ValueError(f"turn index must be a non-negative integer, got {self.index!r}")
        if not isinstance(self.user_text, str) or not isinstance(self.assistant_text, str):
            raise ValueError("turn texts must be strings")
        if not self.user_text.strip() and not self.assistant_text.strip():
            raise ValueError(f"turn {self.index} is empty on both sides")

    def text_for(self, source: Source) -> str:
        return self.user_text if source is Source.USER else self.assistant_text


@runtime_checkable
class ExtractorBackend(Protocol):
    """Produces candidate objects for one turn; embeddings are added later."""

    def extract(
        self,
        turn: ConversationTurn,
        prior_digest: Sequence[str],
        pass_: ExtractionPass,
    ) -> list[CanvasObject]:
        ...


@dataclass
class ExtractionDiagnostics:
    """Counters for things that went wrong but did not stop ingestion."""

    dropped_quotes: int = 0
    failed_turns: int = 0
    duplicates: int = 0

    def merge(self, other: "ExtractionDiagnostics") -> None:
        self.dropped_quotes += other.dropped_quotes
        self.failed_turns += other.failed_turns
        self.duplicates += other.duplicates


def quote_matches(quote: str, text: str) -> bool:
    """True when the quote is a contiguous substring of the text after
    lowercasing and whitespace normalization on both sides."""
    needle = normalize_text(quote)
    return bool(needle) and needle in normalize_text(text)


def prior_digest(graph: CanvasGraph, cap: int = DIGEST_CAP) -> list[str]:
    """Kind-and-content lines for the most recent `cap` objects by turn."""
    ordered = sorted(graph.objects.values(), key=lambda o: o.turn)
    return [f"{obj.kind.value}: {obj.content}" for obj in ordered[-cap:]]


def _run_pass(
    backend: ExtractorBackend,
    turn: ConversationTurn,
    digest: Sequence[str],
    pass_: ExtractionPass,
    diagnostics: ExtractionDiagnostics,
) -> list[CanvasObject]:
    try:
        candidates = backend.extract(turn, digest, pass_)
    except Exception as exc:
        raise BackendFailureError(
            f"extractor failed on turn {turn.index} ({pass_.value} pass): {exc}",
            role="extractor",
            turn=turn.index,
        ) from exc
    survivors = []
    for obj in candidates:
        if quote_matches(obj.quote, turn.text_for(obj.source)):
            survivors.append(obj)
        else:
            diagnostics.dropped_quotes += 1
            logger.debug(
                "dropped ungrounded quote on turn %d: %r", turn.index, obj.quote
            )
    return survivors


def extract_turn(
    backend: ExtractorBackend,
    turn: ConversationTurn,
    prior: CanvasGraph,
    gleaning_enabled: bool = True,
    diagnostics: ExtractionDiagnostics | None = None,
) -> list[CanvasObject]:
    """Extract grounded objects from one turn, deduplicated across both passes.

    Turns must arrive sequentially: after the first ingested turn, turn.index
    has to equal prior.next_turn. A fresh graph accepts any starting index so
    logs may number turns from 0 or 1.
    """
    if prior.next_turn != 0 and turn.index != prior.next_turn:
        raise SequenceError(
            f"expected turn {prior.next_turn}, got {turn.index}; turns must be sequential"
        )
    if diagnostics is None:
        diagnostics = ExtractionDiagnostics()
    digest = prior_digest(prior)
    merged: dict[str, CanvasObject] = {}
    for obj in _run_pass(backend, turn, digest, ExtractionPass.FIRST, diagnostics):
        merged.setdefault(obj.id, obj)
    if gleaning_enabled:
        glean_digest = list(digest)
        glean_digest += [f"{o.kind.value}: {o.content}" for o in merged.values()]
        for obj in _run_pass(backend, turn, glean_digest, ExtractionPass.GLEAN, diagnostics):
            merged.setdefault(obj.id, obj)
    return list(merged.values())


class MockExtractor:
    """Deterministic offline extractor that scans for explicit markers.

    First pass: a line like "DECISION: use redis for caching" yields a
    DECISION object whose content and quote are both the marker payload.
    Gleaning pass: "GLEAN: ..." yields a KEY_FACT the first pass ignores.
    Confidence is always 1.0 so mock runs stay reproducible.
    """

    def extract(
        self,
        turn: ConversationTurn,
        prior_digest: Sequence[str],
        pass_: ExtractionPass,
    ) -> list[CanvasObject]:
        found: list[CanvasObject] = []
        for source in (Source.USER, Source.ASSISTANT):
            for line in turn.text_for(source).splitlines():
                matches = list(MARKER_RE.finditer(line))
                for pos, match in enumerate(matches):
                    # Every marker bounds the previous payload, even markers
                    # the current pass does not emit for.
                    is_glean = match.group(1) == GLEAN_MARKER
                    wanted = is_glean == (pass_ is ExtractionPass.GLEAN)
                    if not wanted:
                        continue
                    end = matches[pos + 1].start() if pos + 1 < len(matches) else len(line)
                    payload = line[match.end():end].strip()
                    if not payload:
                        continue
                    kind = ObjectKind.KEY_FACT if is_glean else ObjectKind(match.group(1))
                    found.append(
                        CanvasObject(
                            kind=kind,
                            content=payload,
                            quote=payload,
                            source=source,
                            turn=turn.index,
                            confidence=1.0,
                        )
                    )
        return found
