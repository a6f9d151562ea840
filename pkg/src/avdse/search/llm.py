"""LLM adapter: prompt assembly, response parsing and a text-completion strategy.

The backend is any callable ``prompt -> completion``.  Only scripted backends
are exercised offline; :class:`HttpBackend` talks to a local completion server
(see the README for the wire format).
"""

from __future__ import annotations

import json
import logging
import os
import re
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from ..design_space import Constraints, DesignPoint, DesignSpace
from ..memory import MemoryRecord, select_references
from .base import History, Proposal, Strategy
from .guided import GuidedParams, GuidedStrategy

log = logging.getLogger(__name__)

Backend = Callable[[str], str]

ENDPOINT_ENV = "AVDSE_LLM_ENDPOINT"
REFERENCE_HEADER = "Reference design points from earlier iterations:"
REQUEST_SENTENCE = "Predict the next design point to simulate and explain your reasoning."
FORMAT_REMINDER = (
    "Your previous answer could not be parsed. Reply with exactly one line of the form "
    "'Next design point: (<cores> cores, <frequency> GHz, <lidar> Hz LiDAR frequency)'."
)


class UnparseableResponseError(ValueError):
    """No design point could be extracted from a completion."""


class BackendError(RuntimeError):
    """The completion backend failed, timed out or ran out of scripted responses."""


# ---------------------------------------------------------------- rendering


def render_point(p: DesignPoint) -> str:
    """Canonical proposal surface form; parse_llm_proposal inverts it."""
    return f"({p.cores} cores, {p.core_frequency_ghz:g} GHz, {p.lidar_hz} Hz LiDAR frequency)"


def _axis_text(values: Sequence) -> str:
    return "{" + ", ".join(f"{v:g}" if isinstance(v, float) else str(v) for v in values) + "}"


def _cores_text(values: Sequence[int]) -> str:
    if len(values) > 2 and list(values) == list(range(values[0], values[-1] + 1)):
        return "{" + f"{values[0]} .. {values[-1]}" + "}"
    return _axis_text(values)


def _task_sentence(task: Any) -> str:
    kind = getattr(getattr(task, "task", None), "value", None) or str(task)
    map_id = getattr(task, "map_id", None)
    return f"The scenario is fixed: {kind.replace('_', ' ')}" + (f" on map '{map_id}'." if map_id else ".")


def assemble_prompts(
    task: Any,
    space: DesignSpace,
    history: Sequence[MemoryRecord],
    last: MemoryRecord | None,
    analysis: str | None = None,
) -> tuple[str, str]:
    """Build the (system, instruction) pair.

    ``history`` holds the reference records to show (already curated by the
    caller); ``analysis`` is the deciphered report text for ``last``.
    """
    system = "\n".join(
        [
            "Role: design-space exploration agent for an autonomous-driving software/hardware stack.",
            "Recommend configurations that satisfy these objectives:",
            "- minimize navigation time",
            "- minimize the normalized trajectory deviation score",
            "- maximize the control command issue rate",
            "- keep hardware cost (cores x GHz) low",
            _task_sentence(task),
            "",
            "Design parameters:",
            f"- number_of_cores in {_cores_text(space.core_counts)}",
            f"- core_frequency (GHz) in {_axis_text(space.frequencies_ghz)}",
            f"- lidar_frequency (Hz) in {_axis_text(space.lidar_rates_hz)}",
            "",
            "Each turn you receive the previously simulated design point, its measured performance and a",
            "bottleneck analysis, plus reference points from earlier iterations.",
            "",
            "Output format: one line 'Next design point: (<cores> cores, <frequency> GHz, <lidar> Hz LiDAR frequency)'",
            "followed by a short explanation.",
        ]
    )
    parts: list[str] = []
    if last is not None:
        p, m = last.point, last.metrics
        score = "n/a (goal not reached)" if m.deviation_score is None else f"{m.deviation_score:.6f}"
        parts += [
            "Design point just simulated:",
            f"- number_of_cores: {p.cores}",
            f"- core_frequency: {p.core_frequency_ghz:g} GHz",
            f"- lidar_frequency: {p.lidar_hz} Hz",
            "",
            "Measured performance:",
            f"- navigation time: {m.nav_time_s:.2f} seconds",
            f"- trajectory normalized score: {score}",
            f"- control command issue rate: {m.ctrl_rate_hz:.3f} Hz",
            f"- hardware cost: {m.hw_cost:g}",
            f"- bottleneck_flags: {sorted(last.bottleneck_flags)}",
            "",
        ]
        if analysis:
            parts += ["Performance analysis:", analysis.strip(), ""]
    parts.append(REFERENCE_HEADER)
    for i, r in enumerate(history, start=1):
        parts += [f"# Reference design point {i}:", r.reference_line(), ""]
    parts.append(REQUEST_SENTENCE)
    return system, "\n".join(parts)


# ---------------------------------------------------------------- parsing

_NUM = r"(\d+(?:\.\d+)?)"
_PAREN = re.compile(r"\(([^()]*)\)")
_CORES = re.compile(_NUM + r"\s*(?:x\s*)?cores?\b", re.I)
_GHZ = re.compile(_NUM + r"\s*GHz\b", re.I)
_HZ = re.compile(r"(?<![\d.])" + _NUM + r"\s*Hz\b")
_PLAIN = re.compile(r"^\s*" + _NUM + r"\s*,\s*" + _NUM + r"\s*,\s*" + _NUM + r"\s*$")
_LABELED = {
    "cores": re.compile(r"number_of_cores\s*[=:]\s*" + _NUM, re.I),
    "freq": re.compile(r"core_frequency\s*(?:\(GHz\))?\s*[=:]\s*" + _NUM, re.I),
    "lidar": re.compile(r"lidar_frequency\s*(?:\(Hz\))?\s*[=:]\s*" + _NUM, re.I),
}


def _nearest(values: Sequence, x: float):
    return min(values, key=lambda v: (abs(v - x), v))


def clamp_to_space(cores: float, freq: float, lidar: float, space: DesignSpace) -> DesignPoint:
    return DesignPoint(
        _nearest(space.core_counts, cores), _nearest(space.frequencies_ghz, freq), _nearest(space.lidar_rates_hz, lidar)
    )


def _from_group(text: str) -> tuple[float, float, float] | None:
    c, g = _CORES.search(text), _GHZ.search(text)
    h = _HZ.search(_GHZ.sub("", text))
    if c and g and h:
        return float(c.group(1)), float(g.group(1)), float(h.group(1))
    m = _PLAIN.match(text)
    if m:
        return float(m.group(1)), float(m.group(2)), float(m.group(3))
    return None


def parse_llm_proposal(response_text: str, space: DesignSpace) -> Proposal:
    """Extract a design point from free text.

    Accepted forms, in priority order: the first parenthesized group holding
    ``<int> cores``, ``<dec> GHz`` and ``<int> Hz`` (any order, extra words
    allowed); the first parenthesized plain triple ``(cores, GHz, Hz)``; the
    labeled ``number_of_cores = .., core_frequency = .., lidar_frequency = ..``
    fields.  Values are clamped to the nearest axis member.
    """
    for m in _PAREN.finditer(response_text):
        vals = _from_group(m.group(1))
        if vals is not None:
            return Proposal(clamp_to_space(*vals, space), response_text)
    found = {k: rx.search(response_text) for k, rx in _LABELED.items()}
    if all(found.values()):
        vals = tuple(float(found[k].group(1)) for k in ("cores", "freq", "lidar"))
        return Proposal(clamp_to_space(*vals, space), response_text)
    raise UnparseableResponseError("no design point found in response")


# ---------------------------------------------------------------- backends


@dataclass
class ScriptedBackend:
    """Replays fixed completions in order, recording every prompt it receives."""

    responses: list[str]
    prompts: list[str] = field(default_factory=list)

    def __call__(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if len(self.prompts) > len(self.responses):
            raise BackendError("scripted backend has no responses left")
        return self.responses[len(self.prompts) - 1]

    @classmethod
    def from_transcript(cls, text: str) -> "ScriptedBackend":
        """Responses separated by lines consisting of ``---``."""
        chunks = re.split(r"(?m)^---\s*$", text)
        return cls([c.strip("\n") for c in chunks if c.strip()])


@dataclass(frozen=True)
class HttpBackend:
    """POST {"prompt": ...} as JSON; expects {"completion": ...} back."""

    endpoint: str
    timeout_s: float = 120.0

    def __call__(self, prompt: str) -> str:
        body = json.dumps({"prompt": prompt}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return str(json.loads(resp.read().decode("utf-8"))["completion"])
        except (OSError, ValueError, KeyError) as exc:
            raise BackendError(f"completion request failed: {exc}") from exc


def backend_from_config(section: dict | None) -> Backend:
    """Build a backend from the config's ``llm`` section.

    ``backend: env`` reads the endpoint URL from ``AVDSE_LLM_ENDPOINT``;
    ``backend: script`` replays the transcript file named by ``path``.
    """
    section = section or {}
    kind = section.get("backend", "env")
    timeout = float(section.get("timeout_s", 120.0))
    if kind == "script":
        with open(section["path"], encoding="utf-8") as fp:
            return ScriptedBackend.from_transcript(fp.read())
    if kind == "env":
        endpoint = os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise BackendError(f"{ENDPOINT_ENV} is not set")
        return HttpBackend(endpoint, timeout)
    raise ValueError(f"unknown llm backend {kind!r}")


def call_with_timeout(backend: Backend, prompt: str, timeout_s: float | None) -> str:
    if timeout_s is None:
        return backend(prompt)
    ex = ThreadPoolExecutor(max_workers=1)
    try:
        return ex.submit(backend, prompt).result(timeout=timeout_s)
    except FutureTimeout as exc:
        raise BackendError(f"backend timed out after {timeout_s} s") from exc
    finally:
        ex.shutdown(wait=False)


# ---------------------------------------------------------------- strategy


@dataclass
class LLMEvent:
    iteration: int
    attempt: int
    outcome: str  # "parsed", "unparseable", "backend_error", "fallback"


class LLMStrategy(Strategy):
    """Asks the backend for each proposal.

    An unparseable completion (or backend failure) is retried once with a
    format reminder appended; a second failure falls back to the guided rules.
    """

    name = "llm"
    allows_reevaluation = True

    def __init__(
        self,
        backend: Backend,
        task: Any = None,
        constraints: Constraints | None = None,
        timeout_s: float | None = 120.0,
        k_recent: int = 3,
        guided: GuidedParams | None = None,
    ) -> None:
        super().__init__()
        self.backend = backend
        self.task = task
        self.constraints = constraints or Constraints()
        self.timeout_s = timeout_s
        self.k_recent = k_recent
        self.fallback = GuidedStrategy(guided, self.constraints)
        self.events: list[LLMEvent] = []

    def _ask(self, prompt: str, space: DesignSpace, iteration: int, attempt: int) -> Proposal | None:
        try:
            text = call_with_timeout(self.backend, prompt, self.timeout_s)
        except BackendError as exc:
            log.warning("LLM backend failure (attempt %d): %s", attempt, exc)
            self.events.append(LLMEvent(iteration, attempt, "backend_error"))
            return None
        try:
            proposal = parse_llm_proposal(text, space)
        except UnparseableResponseError:
            log.warning("unparseable LLM response (attempt %d)", attempt)
            self.events.append(LLMEvent(iteration, attempt, "unparseable"))
            return None
        self.events.append(LLMEvent(iteration, attempt, "parsed"))
        return proposal

    def propose(self, history: History, last_report: Any, space: DesignSpace, rng_seed: int) -> Proposal:
        iteration = len(history) + 1
        last = history[-1] if history else None
        analysis = getattr(last_report, "text", None) if last_report is not None else None
        refs = select_references(history, self.k_recent, constraints=self.constraints)
        system, instruction = assemble_prompts(self.task, space, refs, last, analysis)
        prompt = f"{system}\n\n{instruction}"
        for attempt, text in enumerate((prompt, f"{prompt}\n\n{FORMAT_REMINDER}"), start=1):
            proposal = self._ask(text, space, iteration, attempt)
            if proposal is not None:
                return proposal
        self.events.append(LLMEvent(iteration, 3, "fallback"))
        fb = self.fallback.propose(history, last_report, space, rng_seed)
        return Proposal(fb.point, f"[fallback] {fb.rationale}", fb.terminate)
