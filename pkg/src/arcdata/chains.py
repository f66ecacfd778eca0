"""Serialization grammar for reasoning chains and training samples.

A full chain is three stages in fixed order, concatenated with no whitespace:

    <DEPTH_START>...<DEPTH_END>;TRACE=[[u1,v1],...];ACTION=<tokens>

Bimanual chains carry two trace sections, ``;TRACE_L=...;TRACE_R=...``.  The
action section is the plain concatenation of vocabulary token strings (greedy
longest-match segmentation is exact for the shipped table).  The parser is the
exact inverse of the renderer and reports which stage rejected the input.

Samples wrap a target string with a prompt and image references:

* ``action_reasoning`` -- target is the full chain;
* ``aux_depth``        -- target is the depth string only;
* ``aux_trace``        -- target is the trace section only;
* ``traj_conditioned`` -- input image is the trace overlay, target is the
  action section only.

Samples serialize to JSONL as {"kind", "prompt", "images": [...], "target"}.
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass

from .actions import ActionVocabulary, bins_to_tokens, tokens_to_bins
from .depth import (
    DEPTH_START,
    DepthStringError,
    N_CODES,
    N_TOKENS,
    render_depth_string,
    scan_depth_string,
)
from .traces import ARM_LEFT, ARM_RIGHT, ARM_SINGLE, MAX_POINTS, VisualTrace

TRACE_MARK = ";TRACE="
TRACE_L_MARK = ";TRACE_L="
TRACE_R_MARK = ";TRACE_R="
ACTION_MARK = ";ACTION="

KIND_ACTION_REASONING = "action_reasoning"
KIND_AUX_DEPTH = "aux_depth"
KIND_AUX_TRACE = "aux_trace"
KIND_TRAJ_CONDITIONED = "traj_conditioned"
SAMPLE_KINDS = (
    KIND_ACTION_REASONING,
    KIND_AUX_DEPTH,
    KIND_AUX_TRACE,
    KIND_TRAJ_CONDITIONED,
)

STAGE_DEPTH = "depth"
STAGE_TRACE = "trace"
STAGE_ACTION = "action"
STAGE_ORDER = "order"

_PROMPT_CORE = {
    KIND_ACTION_REASONING: (
        "Describe the scene depth, plan the gripper path, then give the next robot action."
    ),
    KIND_AUX_DEPTH: "Give the depth token string for the current view.",
    KIND_AUX_TRACE: "Give the gripper trace for the current view.",
    KIND_TRAJ_CONDITIONED: "Follow the drawn path, then give the next robot action.",
}


class ChainParseError(ValueError):
    """Parse failure; ``stage`` names the stage that rejected the input."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass(frozen=True)
class ReasoningChain:
    """One serialized reasoning target: depth tokens, trace(s), action bins."""

    depth: tuple[int, ...]
    traces: tuple[VisualTrace, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        depth = tuple(operator.index(t) for t in self.depth)
        if len(depth) != N_TOKENS:
            raise ValueError(f"depth must have exactly {N_TOKENS} tokens")
        for t in depth:
            if not 1 <= t <= N_CODES:
                raise ValueError(f"depth token index {t} outside [1, {N_CODES}]")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "traces", tuple(self.traces))
        if len(self.traces) == 1:
            if self.traces[0].arm != ARM_SINGLE:
                raise ValueError("a single trace must carry the 'single' arm tag")
        elif len(self.traces) == 2:
            if (self.traces[0].arm, self.traces[1].arm) != (ARM_LEFT, ARM_RIGHT):
                raise ValueError("bimanual traces must be ordered (left, right)")
        else:
            raise ValueError("chain needs 1 trace (single arm) or 2 (bimanual)")
        actions = tuple(operator.index(b) for b in self.actions)
        if not actions:
            raise ValueError("chain needs at least one action bin")
        for b in actions:
            if not 0 <= b <= 255:
                raise ValueError(f"action bin {b} outside [0, 255]")
        object.__setattr__(self, "actions", actions)


@dataclass(frozen=True)
class ReasoningSample:
    """One training example (or, with target None, an inference request)."""

    kind: str
    prompt: str
    image_refs: tuple[str, ...]
    target: str | None

    def __post_init__(self):
        if self.kind not in SAMPLE_KINDS:
            raise ValueError(f"unknown sample kind {self.kind!r}")
        if not self.image_refs:
            raise ValueError("sample needs at least one image reference")

    @property
    def is_inference(self) -> bool:
        return self.target is None

    def to_json_line(self) -> str:
        obj = {
            "kind": self.kind,
            "prompt": self.prompt,
            "images": list(self.image_refs),
            "target": self.target,
        }
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "ReasoningSample":
        obj = json.loads(line)
        return cls(
            kind=obj["kind"],
            prompt=obj["prompt"],
            image_refs=tuple(obj["images"]),
            target=obj["target"],
        )


def render_trace_text(traces: tuple[VisualTrace, ...]) -> str:
    """Render the trace section (single ``;TRACE=`` or ``;TRACE_L=..;TRACE_R=..``)."""

    def pointlist(trace: VisualTrace) -> str:
        return "[" + ",".join(f"[{u},{v}]" for u, v in trace.points) + "]"

    if len(traces) == 1:
        return TRACE_MARK + pointlist(traces[0])
    if len(traces) == 2:
        return TRACE_L_MARK + pointlist(traces[0]) + TRACE_R_MARK + pointlist(traces[1])
    raise ValueError("expected 1 or 2 traces")


def render_action_text(bins, vocab: ActionVocabulary) -> str:
    return ACTION_MARK + "".join(bins_to_tokens(bins, vocab))


def render_chain(chain: ReasoningChain, vocab: ActionVocabulary) -> str:
    """Serialize a chain: depth string, then trace section, then actions."""
    return (
        render_depth_string(chain.depth)
        + render_trace_text(chain.traces)
        + render_action_text(chain.actions, vocab)
    )


def _scan_int(data: bytes, pos: int) -> tuple[int, int]:
    digits = pos
    while digits < len(data) and data[digits:digits + 1].isdigit():
        digits += 1
    if digits == pos:
        raise ChainParseError(STAGE_TRACE, f"expected integer at byte {pos}")
    text = data[pos:digits].decode()
    if len(text) > 1 and text[0] == "0":
        raise ChainParseError(STAGE_TRACE, f"zero-padded integer at byte {pos}")
    return int(text), digits


def _scan_pointlist(data: bytes, pos: int, arm: str) -> tuple[VisualTrace, int]:
    if not data.startswith(b"[", pos):
        raise ChainParseError(STAGE_TRACE, f"expected '[' at byte {pos}")
    pos += 1
    points = []
    while True:
        if not data.startswith(b"[", pos):
            raise ChainParseError(STAGE_TRACE, f"expected '[' at byte {pos}")
        pos += 1
        u, pos = _scan_int(data, pos)
        if not data.startswith(b",", pos):
            raise ChainParseError(STAGE_TRACE, f"expected ',' at byte {pos}")
        v, pos = _scan_int(data, pos + 1)
        if not data.startswith(b"]", pos):
            raise ChainParseError(STAGE_TRACE, f"expected ']' at byte {pos}")
        pos += 1
        if not (0 <= u <= 255 and 0 <= v <= 255):
            raise ChainParseError(STAGE_TRACE, f"trace point ({u}, {v}) outside [0, 255]")
        points.append((u, v))
        if data.startswith(b",", pos):
            pos += 1
            continue
        if data.startswith(b"]", pos):
            pos += 1
            break
        raise ChainParseError(STAGE_TRACE, f"expected ',' or ']' at byte {pos}")
    if len(points) > MAX_POINTS:
        raise ChainParseError(
            STAGE_TRACE, f"trace length {len(points)} exceeds {MAX_POINTS} points"
        )
    return VisualTrace(points=tuple(points), arm=arm), pos


def _scan_traces(data: bytes, pos: int) -> tuple[tuple[VisualTrace, ...], int]:
    if data.startswith(TRACE_MARK.encode(), pos):
        trace, pos = _scan_pointlist(data, pos + len(TRACE_MARK), ARM_SINGLE)
        return (trace,), pos
    if data.startswith(TRACE_L_MARK.encode(), pos):
        left, pos = _scan_pointlist(data, pos + len(TRACE_L_MARK), ARM_LEFT)
        if not data.startswith(TRACE_R_MARK.encode(), pos):
            raise ChainParseError(STAGE_TRACE, f"expected {TRACE_R_MARK!r} at byte {pos}")
        right, pos = _scan_pointlist(data, pos + len(TRACE_R_MARK), ARM_RIGHT)
        return (left, right), pos
    if data.startswith(TRACE_R_MARK.encode(), pos):
        raise ChainParseError(STAGE_TRACE, "right trace without a left trace")
    if data.startswith(ACTION_MARK.encode(), pos):
        raise ChainParseError(STAGE_ORDER, "stage order violation: actions before trace")
    raise ChainParseError(STAGE_TRACE, f"expected a trace section at byte {pos}")


def _scan_actions(
    data: bytes, pos: int, vocab: ActionVocabulary
) -> tuple[tuple[int, ...], int]:
    if not data.startswith(ACTION_MARK.encode(), pos):
        if data.startswith(DEPTH_START.encode(), pos):
            raise ChainParseError(STAGE_ORDER, "stage order violation: depth after trace")
        raise ChainParseError(STAGE_ACTION, f"expected {ACTION_MARK!r} at byte {pos}")
    pos += len(ACTION_MARK)
    body = data[pos:].decode("utf-8")
    if not body:
        raise ChainParseError(STAGE_ACTION, "empty action section")
    try:
        tokens = vocab.segment(body, base_offset=pos)
    except ValueError as exc:
        raise ChainParseError(STAGE_ACTION, f"action vocabulary: {exc}") from None
    return tuple(tokens_to_bins(tokens, vocab)), len(data)


def parse_chain(text: str, vocab: ActionVocabulary) -> ReasoningChain:
    """Exact inverse of :func:`render_chain`; rejects malformed input with the
    failing stage (depth / trace / action / order)."""
    data = text.encode("utf-8")
    for mark in (TRACE_MARK, TRACE_L_MARK, TRACE_R_MARK, ACTION_MARK):
        if data.startswith(mark.encode()):
            raise ChainParseError(
                STAGE_ORDER, f"stage order violation: chain must start with {DEPTH_START}"
            )
    try:
        depth, pos = scan_depth_string(data, 0)
    except DepthStringError as exc:
        raise ChainParseError(STAGE_DEPTH, str(exc)) from None
    traces, pos = _scan_traces(data, pos)
    actions, pos = _scan_actions(data, pos, vocab)
    return ReasoningChain(depth=depth, traces=traces, actions=actions)


def _prompt(kind: str, instruction: str) -> str:
    core = _PROMPT_CORE[kind]
    instruction = instruction.strip()
    if not instruction:
        return core
    return f"Task: {instruction.rstrip('.')}. {core}"


def make_sample(
    kind: str,
    instruction: str,
    image_refs,
    vocab: ActionVocabulary | None = None,
    *,
    depth=None,
    traces=None,
    actions=None,
    overlay_ref: str | None = None,
) -> ReasoningSample:
    """Assemble one training sample; the parts must match the kind exactly.

    ``traj_conditioned`` requires ``overlay_ref`` (the trace-overlaid image),
    which becomes the first image reference.
    """
    if kind not in SAMPLE_KINDS:
        raise ValueError(f"unknown sample kind {kind!r}")
    needed = {
        KIND_ACTION_REASONING: ("depth", "traces", "actions"),
        KIND_AUX_DEPTH: ("depth",),
        KIND_AUX_TRACE: ("traces",),
        KIND_TRAJ_CONDITIONED: ("actions",),
    }[kind]
    parts = {"depth": depth, "traces": traces, "actions": actions}
    for name, value in parts.items():
        if (name in needed) != (value is not None):
            raise ValueError(f"{kind} sample: part {name!r} inconsistent with kind")
    if "actions" in needed and vocab is None:
        raise ValueError(f"{kind} sample requires an action vocabulary")
    refs = tuple(str(r) for r in image_refs)
    if kind == KIND_TRAJ_CONDITIONED:
        if overlay_ref is None:
            raise ValueError("traj_conditioned sample requires an overlay image reference")
        refs = (str(overlay_ref),) + refs
    elif overlay_ref is not None:
        raise ValueError(f"{kind} sample does not take an overlay reference")

    if kind == KIND_ACTION_REASONING:
        target = render_chain(
            ReasoningChain(depth=tuple(depth), traces=tuple(traces), actions=tuple(actions)),
            vocab,
        )
    elif kind == KIND_AUX_DEPTH:
        target = render_depth_string(depth)
    elif kind == KIND_AUX_TRACE:
        target = render_trace_text(tuple(traces))
    else:
        target = render_action_text(actions, vocab)
    return ReasoningSample(
        kind=kind, prompt=_prompt(kind, instruction), image_refs=refs, target=target
    )


def make_steering_request(
    image_ref: str, instruction: str, user_trace: VisualTrace
) -> ReasoningSample:
    """Build the inference-time request for a user-drawn trace.

    Structured like a traj_conditioned sample, but with no target; the image
    reference must name the trace-overlaid observation.
    """
    if not isinstance(user_trace, VisualTrace):
        user_trace = VisualTrace(points=tuple(user_trace))
    return ReasoningSample(
        kind=KIND_TRAJ_CONDITIONED,
        prompt=_prompt(KIND_TRAJ_CONDITIONED, instruction),
        image_refs=(str(image_ref),),
        target=None,
    )


def parse_target(kind: str, text: str, vocab: ActionVocabulary):
    """Parse a target with the grammar for its kind (verification pass).

    Returns the parsed stage value(s); raises ChainParseError if the target
    contains anything beyond exactly the stages of the kind.
    """
    data = text.encode("utf-8")
    if kind == KIND_ACTION_REASONING:
        return parse_chain(text, vocab)
    if kind == KIND_AUX_DEPTH:
        try:
            tokens, pos = scan_depth_string(data, 0)
        except DepthStringError as exc:
            raise ChainParseError(STAGE_DEPTH, str(exc)) from None
        if pos != len(data):
            raise ChainParseError(STAGE_DEPTH, "aux_depth target has extra stages")
        return tokens
    if kind == KIND_AUX_TRACE:
        traces, pos = _scan_traces(data, 0)
        if pos != len(data):
            raise ChainParseError(STAGE_TRACE, "aux_trace target has extra stages")
        return traces
    if kind == KIND_TRAJ_CONDITIONED:
        actions, _ = _scan_actions(data, 0, vocab)
        return actions
    raise ValueError(f"unknown sample kind {kind!r}")
