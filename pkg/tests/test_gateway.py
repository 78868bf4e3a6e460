from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from valuescope.exceptions import AuthenticationError, BindingError, ConfigError, ParseError, TransientError, TransportError
from valuescope.gateway import (
    ChatClient,
    ChatPairwiseJudge,
    ChatRequest,
    HttpChatTransport,
    PriceSheet,
    PromptTemplate,
    complete_with_retry,
    estimate_cost,
    parse_likert,
    parse_pairwise,
    render_likert_prompt,
    render_pairwise_prompt,
    render_prompt,
    render_rewrite_prompt,
)
from valuescope.gateway.prompts import SLOT
from valuescope.gateway.stubs import ScriptedChat


def client(responses, **kw):
    return ChatClient(ScriptedChat(responses), sleep=lambda s: None, **kw)


# ------------------------------------------------------------------- prompts


def test_template_without_slots_renders_verbatim():
    t = PromptTemplate("plain", "Rate this comment.")
    assert render_prompt(t, {}) == "Rate this comment."


def test_rewrite_prompt_contains_inputs_and_level_phrase():
    text = render_rewrite_prompt("formality", 5, "Need advice before buying", "ty!")
    assert "Need advice before buying" in text
    assert "ty!" in text
    assert "Very Formal" in text
    assert not SLOT.search(text)


def test_unbound_slot_names_the_slot():
    t = PromptTemplate("t", "Comment: {{COMMENT}}")
    with pytest.raises(BindingError, match="missing slot COMMENT"):
        render_prompt(t, {})


def test_undeclared_slot_rejected():
    with pytest.raises(BindingError):
        PromptTemplate("t", "{{A}} {{B}}", slots=("A",))


def test_slot_values_are_not_expanded_twice():
    t = PromptTemplate("t", "{{A}}|{{B}}")
    assert render_prompt(t, {"A": "{{B}}", "B": "x"}) == "{{B}}|x"


def test_pairwise_prompt_keeps_answer_tokens():
    text = render_pairwise_prompt("politeness", "one", "two", (("T1", ""), ("T2", "")))
    assert "{1}" in text and "{2}" in text
    assert "one" in text and "two" in text and "T2" in text
    assert not SLOT.search(text)


@pytest.mark.parametrize("dim", ["politeness", "supportiveness", "sarcasm", "humor", "formality", "verbosity"])
def test_likert_prompt_renders_for_every_dimension(dim):
    assert not SLOT.search(render_likert_prompt(dim, "some comment", "title"))


# ------------------------------------------------------------------- parsing


def test_parse_likert_examples():
    assert parse_likert("Reasoning... [4]") == 4
    with pytest.raises(ParseError):
        parse_likert("[6] too formal")
    with pytest.raises(ParseError):
        parse_likert("no brackets here")


def test_parse_pairwise_examples():
    assert parse_pairwise("{2}. COMMENT2 exhibits...") == "second"
    assert parse_pairwise("{1}") == "first"
    assert parse_pairwise('  "{1}"') == "first"
    with pytest.raises(ParseError):
        parse_pairwise("Comment 1 is more formal")


@given(st.integers(1, 5), st.text(alphabet=st.characters(blacklist_characters="[]"), max_size=40))
def test_parse_likert_total_on_compliant_responses(rating, reasoning):
    assert parse_likert(f"{reasoning} [{rating}]") == rating


# ---------------------------------------------------------------------- cost


def test_cost_examples():
    assert estimate_cost(1349.35, 80, PriceSheet(0.5, 1.5)) == pytest.approx(0.000795, abs=1e-6)
    assert estimate_cost(1088.71, 80, PriceSheet(30, 60)) == pytest.approx(0.0375, abs=1e-4)
    assert estimate_cost(0, 0, PriceSheet(3, 7)) == 0


def test_negative_price_rejected():
    with pytest.raises(ConfigError):
        PriceSheet(-1, 0)


@given(
    st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6),
    st.floats(0, 100), st.floats(0, 100),
)
def test_cost_is_linear(a_in, a_out, b_in, b_out, p_in, p_out):
    price = PriceSheet(p_in, p_out)
    total = estimate_cost(a_in + b_in, a_out + b_out, price)
    assert total == pytest.approx(estimate_cost(a_in, a_out, price) + estimate_cost(b_in, b_out, price), rel=1e-9, abs=1e-12)


# ------------------------------------------------------------------- retries


def test_immediate_success_needs_no_retry():
    c = client(["[3]"])
    ex = complete_with_retry(c, ChatRequest.from_prompt("hi"))
    assert ex.attempts == 1 and ex.response == "[3]"


def test_two_failures_then_success():
    c = client([TransientError("a"), TransientError("b"), "ok"], max_retries=3)
    ex = c.complete(ChatRequest.from_prompt("hi"))
    assert ex.attempts == 3
    assert c.transport.calls == 3


def test_exhaustion_after_max_retries_plus_one():
    c = client([TransientError("down")], max_retries=2)
    with pytest.raises(TransportError) as info:
        c.complete(ChatRequest.from_prompt("hi"))
    assert info.value.attempts == 3
    assert isinstance(info.value.last_error, TransientError)
    assert c.transport.calls == 3


def test_authentication_failure_is_not_retried():
    c = client([AuthenticationError("bad key"), "ok"], max_retries=5)
    with pytest.raises(AuthenticationError):
        c.complete(ChatRequest.from_prompt("hi"))
    assert c.transport.calls == 1


def test_backoff_schedule_is_used():
    delays = []
    c = ChatClient(ScriptedChat([TransientError("x"), TransientError("y"), "ok"]), sleep=delays.append)
    c.complete(ChatRequest.from_prompt("hi"))
    assert delays == [1.0, 2.0]


def test_usage_accounting_reports_and_approximates_tokens():
    c = client([{"text": "[2]", "input_tokens": 1000, "output_tokens": 10}, "two words"],
               price=PriceSheet(0.5, 1.5))
    c.complete_text("a b c")
    assert not c.usage.approximate
    c.complete_text("a b c")
    assert c.usage.approximate
    assert (c.usage.requests, c.usage.input_tokens, c.usage.output_tokens) == (2, 1003, 12)
    assert c.usage.cost(c.price) == pytest.approx(1003 * 0.5e-6 + 12 * 1.5e-6)


def test_self_consistency_majority():
    c = client(["{2}", "{1}", "{2}"])
    judge = ChatPairwiseJudge(c, samples=3)
    assert judge.judge("a", "b", "humor") == "second"
    with pytest.raises(ConfigError):
        ChatPairwiseJudge(c, samples=2)


def test_http_transport_reads_key_from_environment(monkeypatch):
    t = HttpChatTransport("http://localhost:9/v1", "m", api_key_env="VS_TEST_KEY")
    monkeypatch.delenv("VS_TEST_KEY", raising=False)
    with pytest.raises(AuthenticationError, match="VS_TEST_KEY"):
        t._headers()
    monkeypatch.setenv("VS_TEST_KEY", "abc")
    assert t._headers()["Authorization"] == "Bearer abc"
    body = t.payload(ChatRequest.from_prompt("hi", 0.7, system="s"))
    assert body["messages"][0] == {"role": "system", "content": "s"} and body["temperature"] == 0.7
