import pytest

from evidencekit.corpus import FIVE_CLASS_LABELS, Premise, make_premise_id
from evidencekit.gateway import Gateway, SchemaFailure, StubBackend
from evidencekit.verification import (
    INVALID_PREDICTION,
    EmptyGiven,
    VerificationResult,
    build_verification_prompt,
    citation_stats,
    coverage_aggregate,
    macro_f1,
    verify_one,
)

URL = "https://example.org/fact/test"
BINARY = ("true-side", "false-side")


def _premise(letter, text, mode="A"):
    return Premise(
        article_url=URL,
        mode=mode,
        premise_id=make_premise_id(URL, mode, letter),
        letter_id=letter,
        text=text,
    )


def _result(predicted, gold, coverage=1.0, parse_ok=True, given=("A",), cited=("A",), n_hall=0):
    return VerificationResult(
        article_url=URL,
        mode="A",
        predicted=predicted,
        gold=gold,
        justification="",
        cited_ids=tuple(cited),
        given_ids=tuple(given),
        coverage=coverage,
        parse_ok=parse_ok,
        n_hallucinated=n_hall,
    )


# --------------------------------------------------------------------------
# citation accounting


def test_citation_stats_hand_example():
    kept, coverage, hallucinated = citation_stats({"A", "C", "Z"}, ["A", "B", "C", "D", "E"])
    assert kept == ("A", "C")
    assert coverage == pytest.approx(0.4)
    assert hallucinated == 1


def test_citation_stats_full_and_none():
    kept, coverage, hallucinated = citation_stats(["B", "A"], ["A", "B"])
    assert kept == ("A", "B")
    assert coverage == 1.0
    assert hallucinated == 0
    kept, coverage, hallucinated = citation_stats([], ["A", "B"])
    assert kept == ()
    assert coverage == 0.0


def test_citation_stats_duplicates_count_once():
    kept, coverage, hallucinated = citation_stats(["A", "A", "Q", "Q"], ["A", "B"])
    assert kept == ("A",)
    assert coverage == 0.5
    assert hallucinated == 1


def test_citation_stats_letter_order():
    kept, _, _ = citation_stats(["AA", "B", "Z"], ["B", "Z", "AA"])
    assert kept == ("B", "Z", "AA")


def test_citation_stats_empty_given():
    with pytest.raises(EmptyGiven):
        citation_stats(["A"], [])


# --------------------------------------------------------------------------
# prompt


def test_verification_prompt_contents():
    premises = [_premise("A", "First fact."), _premise("C", "Second fact.")]
    system, user = build_verification_prompt("The claim.", premises, BINARY)
    assert "Allowed labels: true-side, false-side" in system
    assert "Return JSON only" in system
    assert "Claim: The claim." in user
    assert "A: First fact." in user
    assert "C: Second fact." in user


# --------------------------------------------------------------------------
# verify_one


def test_verify_one_with_stub():
    premises = [_premise("C", "Second."), _premise("A", "First.")]
    gateway = Gateway(StubBackend())
    result = verify_one("The claim.", premises, BINARY, gateway, gold="false-side")
    assert result.predicted == "true-side"  # the stub picks the first label
    assert result.given_ids == ("A", "C")  # sorted despite input order
    assert result.cited_ids == ("A", "C")  # the stub cites everything shown
    assert result.coverage == 1.0
    assert result.n_hallucinated == 0
    assert result.parse_ok is True
    assert result.gold == "false-side"
    assert result.mode == "A"


def test_verify_one_parse_failure():
    class FailingGateway:
        def generate(self, request):
            raise SchemaFailure("never parsed", raw_text="junk", attempts=3)

    premises = [_premise("A", "First.")]
    result = verify_one("The claim.", premises, BINARY, FailingGateway(), gold="true-side")
    assert result.predicted == INVALID_PREDICTION
    assert result.parse_ok is False
    assert result.coverage == 0.0
    assert result.cited_ids == ()
    assert result.given_ids == ("A",)


def test_verify_one_requires_premises():
    with pytest.raises(EmptyGiven):
        verify_one("The claim.", [], BINARY, Gateway(StubBackend()))


def test_verify_one_duplicate_letters_shown_once():
    # mode C can yield several premises on one letter; given_ids stays distinct
    premises = [
        Premise(
            article_url=URL,
            mode="C",
            premise_id=make_premise_id(URL, "C", "B", seq),
            letter_id="B",
            text=f"Variant {seq}.",
            evidence_type="CONTEXT",
        )
        for seq in (None, 1)
    ]
    result = verify_one("The claim.", premises, BINARY, Gateway(StubBackend()))
    assert result.given_ids == ("B",)
    assert result.coverage == 1.0


# --------------------------------------------------------------------------
# macro F1


def test_macro_f1_perfect():
    results = [_result(label, label) for label in FIVE_CLASS_LABELS]
    assert macro_f1(results, FIVE_CLASS_LABELS) == 1.0


def test_macro_f1_hand_example():
    # two labels: first has tp=1 fp=1 fn=0 -> P=0.5 R=1 F1=2/3;
    # second has tp=0 fp=0 fn=1 -> F1=0; macro = 1/3
    results = [
        _result("true-side", "true-side"),
        _result("true-side", "false-side"),
    ]
    assert macro_f1(results, BINARY) == pytest.approx(1 / 3)


def test_macro_f1_absent_label_scores_zero():
    results = [_result("true-side", "true-side")]
    assert macro_f1(results, BINARY) == pytest.approx(0.5)


def test_macro_f1_invalid_predictions_hurt():
    results = [
        _result("true-side", "true-side"),
        _result(INVALID_PREDICTION, "true-side", parse_ok=False),
    ]
    # tp=1 fp=0 fn=1 -> P=1 R=0.5 F1=2/3 for the first label, 0 for the other
    assert macro_f1(results, BINARY) == pytest.approx((2 / 3) / 2)


def test_macro_f1_empty():
    with pytest.raises(ValueError):
        macro_f1([], BINARY)


# --------------------------------------------------------------------------
# coverage aggregate


def test_coverage_aggregate_means_parsed_only():
    results = [
        _result("true-side", "true-side", coverage=1.0),
        _result("true-side", "true-side", coverage=0.5),
        _result(INVALID_PREDICTION, "true-side", coverage=0.0, parse_ok=False),
    ]
    assert coverage_aggregate(results) == pytest.approx(0.75)


def test_coverage_aggregate_none_when_nothing_parsed():
    results = [_result(INVALID_PREDICTION, "true-side", coverage=0.0, parse_ok=False)]
    assert coverage_aggregate(results) is None


def test_coverage_aggregate_empty_given_raises():
    results = [_result("true-side", "true-side", given=())]
    with pytest.raises(EmptyGiven):
        coverage_aggregate(results)


def test_verification_result_roundtrip():
    result = _result("true-side", "false-side", coverage=0.4, cited=("A", "C"), given=("A", "B", "C"))
    assert VerificationResult.from_dict(result.to_dict()) == result
