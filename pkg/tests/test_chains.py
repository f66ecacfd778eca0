from pathlib import Path

import numpy as np
import pytest

from arcdata.chains import (
    ChainParseError,
    KIND_ACTION_REASONING,
    KIND_AUX_DEPTH,
    KIND_AUX_TRACE,
    KIND_TRAJ_CONDITIONED,
    ReasoningChain,
    ReasoningSample,
    make_sample,
    make_steering_request,
    parse_chain,
    parse_target,
    render_chain,
    render_depth_string,
    render_trace_text,
)
from arcdata.traces import VisualTrace

from conftest import random_chain

GOLDEN = Path(__file__).parent / "golden"


def minimal_chain():
    return ReasoningChain(
        depth=tuple([1] * 100),
        traces=(VisualTrace(points=((0, 0),)),),
        actions=(0,),
    )


class TestRender:
    def test_matches_golden_file(self, vocab):
        golden = (GOLDEN / "chain_minimal.txt").read_text(encoding="utf-8")
        assert render_chain(minimal_chain(), vocab) == golden

    def test_single_bin_change_is_local(self, vocab):
        rng = np.random.default_rng(1)
        chain_a = random_chain(rng, bimanual=False, n_actions=7)
        actions = list(chain_a.actions)
        actions[3] = (actions[3] + 1) % 256
        chain_b = ReasoningChain(
            depth=chain_a.depth, traces=chain_a.traces, actions=tuple(actions)
        )
        text_a = render_chain(chain_a, vocab)
        text_b = render_chain(chain_b, vocab)
        prefix_a = text_a[: text_a.index(";ACTION=")]
        prefix_b = text_b[: text_b.index(";ACTION=")]
        assert prefix_a == prefix_b
        assert vocab.tokens[chain_a.actions[3]] in text_a
        assert vocab.tokens[actions[3]] in text_b
        assert text_a != text_b

    def test_bimanual_render_has_tagged_sections(self, vocab):
        rng = np.random.default_rng(2)
        chain = random_chain(rng, bimanual=True, n_actions=14)
        text = render_chain(chain, vocab)
        assert ";TRACE_L=[" in text
        assert ";TRACE_R=[" in text
        assert ";TRACE=[" not in text


class TestParse:
    @pytest.mark.parametrize("bimanual", [False, True])
    @pytest.mark.parametrize("n_actions", [7, 56])
    def test_round_trip(self, vocab, bimanual, n_actions):
        rng = np.random.default_rng(3)
        for _ in range(100):
            chain = random_chain(rng, bimanual=bimanual, n_actions=n_actions)
            assert parse_chain(render_chain(chain, vocab), vocab) == chain

    def test_trace_before_depth_is_order_violation(self, vocab):
        text = ";TRACE=[[0,0]]" + render_depth_string([1] * 100)
        with pytest.raises(ChainParseError, match="stage order violation") as err:
            parse_chain(text, vocab)
        assert err.value.stage == "order"

    def test_action_before_trace_is_order_violation(self, vocab):
        text = render_depth_string([1] * 100) + ";ACTION=" + vocab.tokens[0]
        with pytest.raises(ChainParseError) as err:
            parse_chain(text, vocab)
        assert err.value.stage == "order"

    def test_truncated_depth_reports_count(self, vocab):
        text = (
            "<DEPTH_START>" + "<DEPTH_5>" * 50 + "<DEPTH_END>"
            + ";TRACE=[[0,0]];ACTION=" + vocab.tokens[0]
        )
        with pytest.raises(ChainParseError, match="expected 100 depth tokens, found 50") as err:
            parse_chain(text, vocab)
        assert err.value.stage == "depth"

    def test_six_point_trace_rejected_at_trace_stage(self, vocab):
        points = ",".join("[1,1]" for _ in range(6))
        text = render_depth_string([1] * 100) + f";TRACE=[{points}];ACTION=" + vocab.tokens[0]
        with pytest.raises(ChainParseError, match="trace length") as err:
            parse_chain(text, vocab)
        assert err.value.stage == "trace"

    def test_unknown_action_token_rejected(self, vocab):
        text = render_depth_string([1] * 100) + ";TRACE=[[0,0]];ACTION=???"
        with pytest.raises(ChainParseError, match="action vocabulary") as err:
            parse_chain(text, vocab)
        assert err.value.stage == "action"

    def test_empty_action_section_rejected(self, vocab):
        text = render_depth_string([1] * 100) + ";TRACE=[[0,0]];ACTION="
        with pytest.raises(ChainParseError) as err:
            parse_chain(text, vocab)
        assert err.value.stage == "action"

    def test_right_trace_without_left_rejected(self, vocab):
        text = render_depth_string([1] * 100) + ";TRACE_R=[[0,0]];ACTION=" + vocab.tokens[0]
        with pytest.raises(ChainParseError, match="without a left") as err:
            parse_chain(text, vocab)
        assert err.value.stage == "trace"

    def test_coordinate_out_of_range_rejected(self, vocab):
        text = render_depth_string([1] * 100) + ";TRACE=[[0,256]];ACTION=" + vocab.tokens[0]
        with pytest.raises(ChainParseError, match=r"outside \[0, 255\]") as err:
            parse_chain(text, vocab)
        assert err.value.stage == "trace"


class TestSamples:
    def test_action_reasoning_target_round_trips(self, vocab):
        rng = np.random.default_rng(4)
        chain = random_chain(rng, bimanual=False, n_actions=7)
        sample = make_sample(
            KIND_ACTION_REASONING,
            "put the cup on the plate",
            ["ep/rgb_0.png"],
            vocab,
            depth=chain.depth,
            traces=chain.traces,
            actions=chain.actions,
        )
        assert parse_chain(sample.target, vocab) == chain
        assert "put the cup on the plate" in sample.prompt

    def test_aux_depth_target_is_depth_only(self, vocab):
        depth = tuple([9] * 100)
        sample = make_sample(KIND_AUX_DEPTH, "close the lid", ["ep/rgb_0.png"], depth=depth)
        assert parse_target(KIND_AUX_DEPTH, sample.target, vocab) == depth
        with pytest.raises(ChainParseError):
            parse_chain(sample.target, vocab)

    def test_aux_trace_target_is_trace_only(self, vocab):
        traces = (VisualTrace(points=((1, 2), (3, 4))),)
        sample = make_sample(KIND_AUX_TRACE, "wipe the table", ["ep/rgb_0.png"], traces=traces)
        assert sample.target == render_trace_text(traces)
        parsed = parse_target(KIND_AUX_TRACE, sample.target, vocab)
        assert parsed == traces

    def test_traj_conditioned_uses_overlay_and_actions_only(self, vocab):
        sample = make_sample(
            KIND_TRAJ_CONDITIONED,
            "open the drawer",
            ["ep/rgb_0.png", "ep/wrist_0.png"],
            vocab,
            actions=(5, 6, 7),
            overlay_ref="overlays/ep/frame_0.png",
        )
        assert sample.image_refs[0] == "overlays/ep/frame_0.png"
        assert sample.image_refs[1:] == ("ep/rgb_0.png", "ep/wrist_0.png")
        assert parse_target(KIND_TRAJ_CONDITIONED, sample.target, vocab) == (5, 6, 7)
        assert sample.target.startswith(";ACTION=")

    def test_traj_conditioned_requires_overlay(self, vocab):
        with pytest.raises(ValueError, match="overlay"):
            make_sample(
                KIND_TRAJ_CONDITIONED, "x", ["ep/rgb_0.png"], vocab, actions=(1,)
            )

    def test_parts_must_match_kind(self, vocab):
        with pytest.raises(ValueError, match="inconsistent"):
            make_sample(
                KIND_AUX_DEPTH,
                "x",
                ["img.png"],
                vocab,
                depth=tuple([1] * 100),
                actions=(1,),
            )

    def test_every_kind_parses_only_under_its_own_grammar(self, vocab):
        rng = np.random.default_rng(5)
        chain = random_chain(rng, bimanual=False, n_actions=7)
        samples = {
            KIND_ACTION_REASONING: make_sample(
                KIND_ACTION_REASONING, "t", ["i.png"], vocab,
                depth=chain.depth, traces=chain.traces, actions=chain.actions,
            ),
            KIND_AUX_DEPTH: make_sample(KIND_AUX_DEPTH, "t", ["i.png"], depth=chain.depth),
            KIND_AUX_TRACE: make_sample(KIND_AUX_TRACE, "t", ["i.png"], traces=chain.traces),
            KIND_TRAJ_CONDITIONED: make_sample(
                KIND_TRAJ_CONDITIONED, "t", ["i.png"], vocab,
                actions=chain.actions, overlay_ref="o.png",
            ),
        }
        for kind, sample in samples.items():
            parse_target(kind, sample.target, vocab)  # own grammar accepts
            for other, other_sample in samples.items():
                if other != kind:
                    with pytest.raises(ChainParseError):
                        parse_target(other, sample.target, vocab)

    def test_jsonl_round_trip(self, vocab):
        sample = make_sample(KIND_AUX_DEPTH, "turn the handle", ["a.png"], depth=tuple([3] * 100))
        assert ReasoningSample.from_json_line(sample.to_json_line()) == sample


class TestSteering:
    def test_five_point_sketch_passes_through(self):
        trace = VisualTrace(points=tuple((i * 10, i * 20) for i in range(1, 6)))
        request = make_steering_request("overlay.png", "pick up the bowl", trace)
        assert request.kind == KIND_TRAJ_CONDITIONED
        assert request.is_inference and request.target is None
        assert request.image_refs == ("overlay.png",)

    def test_six_point_sketch_rejected(self):
        with pytest.raises(ValueError, match="1-5 points"):
            make_steering_request(
                "overlay.png", "x", tuple((i, i) for i in range(6))
            )

    def test_empty_instruction_uses_bare_template(self):
        request = make_steering_request("overlay.png", "", VisualTrace(points=((0, 0),)))
        assert request.prompt == "Follow the drawn path, then give the next robot action."
        with_task = make_steering_request("o.png", "pick up the bowl", VisualTrace(points=((0, 0),)))
        assert with_task.prompt.startswith("Task: pick up the bowl.")
