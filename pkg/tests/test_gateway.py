from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from storycut.config import PipelineConfig
from storycut.errors import ProviderError, StructuredOutputError
from storycut.gateway import (
    HttpProvider,
    ModelGateway,
    PromptKind,
    ScriptedProvider,
    estimate_tokens,
    fingerprint_blocks,
)
from storycut.gateway.structured import OutputInvalid, parse_output, time_value_ms

VALID_TRACE = json.dumps(
    {"annotations": [{"at": 20, "visual": "wide shot"}, {"at": 40, "visual": "close-up"}]}
)


class TestEstimateTokens:
    def test_empty(self):
        assert estimate_tokens("") == 0

    def test_formula(self):
        assert estimate_tokens("12345678") == 2
        assert estimate_tokens("x" * 4001) == 1001

    def test_monotone(self):
        previous = 0
        for n in range(0, 50):
            current = estimate_tokens("a" * n)
            assert current >= previous
            previous = current


class TestRepairLoop:
    def gateway(self, responses, repair_attempts=2):
        provider = ScriptedProvider(responses={"scene_comprehend": responses})
        return ModelGateway(provider, PipelineConfig(repair_attempts=repair_attempts))

    def test_first_attempt_success(self):
        gw = self.gateway([VALID_TRACE])
        request = gw.request(PromptKind.SCENE_COMPREHEND, [("scene", "range: 00:00:00.000..00:05:00.000")])
        response = gw.complete(request)
        assert response.attempts == 1
        assert response.value["annotations"][0]["at_ms"] == 20_000

    def test_malformed_then_valid_takes_two_attempts(self):
        gw = self.gateway(["{not json", VALID_TRACE])
        response = gw.complete(gw.request(PromptKind.SCENE_COMPREHEND, [("scene", "x")]))
        assert response.attempts == 2

    def test_exhaustion_after_three_total_attempts(self):
        gw = self.gateway(["nope", "still nope", "never"], repair_attempts=2)
        with pytest.raises(StructuredOutputError) as exc:
            gw.complete(gw.request(PromptKind.SCENE_COMPREHEND, [("scene", "x")]))
        assert len(exc.value.attempts) == 3

    def test_repair_prompt_carries_error_feedback(self):
        provider = ScriptedProvider(responses={"scene_comprehend": ["garbage", VALID_TRACE]})
        gw = ModelGateway(provider, PipelineConfig())
        gw.complete(gw.request(PromptKind.SCENE_COMPREHEND, [("scene", "x")]))
        # the provider saw two calls; the journal records the invalid attempt
        assert [e["status"] for e in gw.journal] == ["invalid", "ok"]

    def test_operation_validator_participates_in_repair(self):
        gw = self.gateway([VALID_TRACE, VALID_TRACE])

        calls = []

        def validator(value):
            calls.append(1)
            if len(calls) == 1:
                raise OutputInvalid("first one rejected by the operation")

        response = gw.complete(
            gw.request(PromptKind.SCENE_COMPREHEND, [("scene", "x")]), validator=validator
        )
        assert response.attempts == 2


class TestFingerprint:
    def test_pure_function_of_blocks(self):
        blocks = (("a", "one"), ("b", "two"))
        assert fingerprint_blocks(blocks) == fingerprint_blocks(tuple(blocks))
        assert fingerprint_blocks(blocks) != fingerprint_blocks((("a", "one"), ("b", "other")))
        assert fingerprint_blocks(blocks) != fingerprint_blocks((("b", "two"), ("a", "one")))

    def test_scripted_by_fingerprint_lookup(self):
        gw = ModelGateway(ScriptedProvider(), PipelineConfig())
        request = gw.request(PromptKind.NARRATE, [("section", "intent: x")])
        provider = ScriptedProvider(by_fingerprint={("narrate", request.fingerprint): "narration text"})
        gw2 = ModelGateway(provider, PipelineConfig())
        assert gw2.complete(request).value == "narration text"

    def test_identical_requests_identical_transcripts(self):
        world_provider = ScriptedProvider(handlers={"narrate": lambda p, a: f"echo {len(p)}"})
        gw = ModelGateway(world_provider, PipelineConfig())
        request = gw.request(PromptKind.NARRATE, [("section", "intent: hold course")])
        assert gw.complete(request).text == gw.complete(request).text

    def test_missing_script_is_provider_error(self):
        gw = ModelGateway(ScriptedProvider(), PipelineConfig())
        with pytest.raises(ProviderError):
            gw.complete(gw.request(PromptKind.NARRATE, [("section", "x")]))


class TestKindBindings:
    def test_every_kind_binds_one_template_and_one_schema(self):
        from storycut.gateway import structured, templates

        kinds = {k.value for k in PromptKind}
        assert set(templates.TEMPLATES) == kinds
        assert set(structured._PARSERS) == kinds


class TestScriptedDirLoader:
    def test_dir_keys_and_sequences(self, tmp_path):
        (tmp_path / "narrate__abcd1234deadbeef.txt").write_text("exact hit")
        (tmp_path / "narrate__seq01.txt").write_text("first")
        (tmp_path / "narrate__seq02.txt").write_text("second")
        (tmp_path / "qa_route__default.txt").write_text('{"needs_visual": false, "rationale": "r"}')
        provider = ScriptedProvider.from_dir(tmp_path)
        assert provider.send("narrate", "p", (), fingerprint="abcd1234deadbeef") == "exact hit"
        assert provider.send("narrate", "p", (), fingerprint="zzz") == "first"
        assert provider.send("narrate", "p", (), fingerprint="zzz") == "second"
        assert "needs_visual" in provider.send("qa_route", "p", ())
        assert "needs_visual" in provider.send("qa_route", "p", ())  # default reusable

    def test_missing_dir(self, tmp_path):
        with pytest.raises(ProviderError):
            ScriptedProvider.from_dir(tmp_path / "ghost")


class TestStructuredParsers:
    def test_time_values(self):
        assert time_value_ms(12.5, "x") == 12_500
        assert time_value_ms("00:00:20.000", "x") == 20_000
        assert time_value_ms("12.5", "x") == 12_500
        with pytest.raises(OutputInvalid):
            time_value_ms(-1, "x")
        with pytest.raises(OutputInvalid):
            time_value_ms(True, "x")

    def test_fenced_json_accepted(self):
        text = "```json\n" + VALID_TRACE + "\n```"
        assert parse_output("scene_comprehend", text)["annotations"]

    def test_surrounding_prose_tolerated(self):
        text = "Here you go:\n" + VALID_TRACE + "\nHope that helps!"
        assert parse_output("scene_comprehend", text)["annotations"]

    def test_annotation_requires_content(self):
        with pytest.raises(OutputInvalid):
            parse_output("scene_comprehend", json.dumps({"annotations": [{"at": 5}]}))

    def test_storyboard_requires_sections(self):
        with pytest.raises(OutputInvalid):
            parse_output("storyboard_structure", json.dumps({"sections": []}))

    def test_refine_requires_some_section(self):
        with pytest.raises(OutputInvalid):
            parse_output("refine", json.dumps({}))

    def test_qa_answer_normalizes_timestamps(self):
        value = parse_output(
            "qa_answer",
            json.dumps({"answer": "a", "cited_timestamps": ["00:01:00.000", 30], "grounded": True}),
        )
        assert value["cited_timestamps_ms"] == [60_000, 30_000]


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        payload = json.dumps({"text": f"echo:{body['kind']}"}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


class TestHttpProvider:
    def test_round_trip_against_local_server(self):
        server = HTTPServer(("127.0.0.1", 0), _Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            provider = HttpProvider(f"http://127.0.0.1:{server.server_port}")
            assert provider.send("narrate", "hello", ()) == "echo:narrate"
        finally:
            server.shutdown()

    def test_transport_failure_is_provider_error(self):
        provider = HttpProvider("http://127.0.0.1:1", timeout=0.2)
        with pytest.raises(ProviderError):
            provider.send("narrate", "hello", ())
