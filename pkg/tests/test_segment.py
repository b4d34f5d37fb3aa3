from hypothesis import given
from hypothesis import strategies as st

from evidencekit.htmlnorm import LinkSpan, NormalizedDocument, TextBlock
from evidencekit.segment import default_abbreviations, segment, split_sentences

GUARD = default_abbreviations()


def _doc(*blocks) -> NormalizedDocument:
    return NormalizedDocument(article_url="https://example.org/a", blocks=tuple(blocks))


def _texts(text: str) -> list:
    return [text[s:e] for s, e in split_sentences(text, GUARD)]


def test_basic_split():
    assert _texts("One thing happened. Another followed.") == [
        "One thing happened.",
        "Another followed.",
    ]


def test_abbreviation_guard():
    # "Mr." must not split even before a capitalized name
    assert _texts("Mr. Smith won. He said so.") == ["Mr. Smith won.", "He said so."]


def test_more_guards():
    assert _texts("Sen. Jones of the U.S. Senate voted. The bill passed.") == [
        "Sen. Jones of the U.S. Senate voted.",
        "The bill passed.",
    ]
    assert _texts("It cost No. 4 dearly. Nobody knows why.") == [
        "It cost No. 4 dearly.",
        "Nobody knows why.",
    ]


def test_single_initial_guard():
    assert _texts("George W. Bush spoke. The crowd listened.") == [
        "George W. Bush spoke.",
        "The crowd listened.",
    ]


def test_lowercase_continuation_never_splits():
    assert _texts("It rose 3.9 percent. that figure was disputed") == [
        "It rose 3.9 percent. that figure was disputed"
    ]


def test_decimal_numbers_do_not_split():
    assert _texts("The rate fell to 3.9 percent in March. Analysts agreed.") == [
        "The rate fell to 3.9 percent in March.",
        "Analysts agreed.",
    ]


def test_question_and_exclamation():
    assert _texts("Did it happen? Yes! Everyone saw it.") == ["Did it happen?", "Yes!", "Everyone saw it."]


def test_closing_quote_stays_with_sentence():
    assert _texts('He called it "a win." The mayor disagreed.') == [
        'He called it "a win."',
        "The mayor disagreed.",
    ]


def test_no_terminal_punctuation_is_one_sentence():
    assert _texts("A headline without punctuation") == ["A headline without punctuation"]


def test_segment_assigns_sequential_letters():
    doc = _doc(
        TextBlock("First here. Second there."),
        TextBlock("Third block sentence."),
    )
    units = segment(doc)
    assert [u.letter_id for u in units] == ["A", "B", "C"]
    assert [u.text for u in units] == ["First here.", "Second there.", "Third block sentence."]
    assert all(u.article_url == "https://example.org/a" for u in units)
    assert all(not u.is_verdict_sentence for u in units)


def test_segment_27_units_reaches_double_letters():
    doc = _doc(*(TextBlock(f"Sentence number {i} stands alone.") for i in range(27)))
    units = segment(doc)
    assert len(units) == 27
    assert units[25].letter_id == "Z"
    assert units[26].letter_id == "AA"


def test_units_never_span_blocks():
    # no terminal punctuation at the end of block one; it still closes there
    doc = _doc(TextBlock("An unfinished fragment"), TextBlock("And a second block."))
    units = segment(doc)
    assert [u.text for u in units] == ["An unfinished fragment", "And a second block."]


def test_hyperlinks_inherited_by_intersecting_unit():
    text = "First sentence here. Second sentence cites a source."
    # "cites a source" lives in the second sentence
    start = text.index("cites")
    span = LinkSpan(href="https://x.example/s", start=start, end=start + len("cites a source"))
    doc = _doc(TextBlock(text, links=(span,)))
    first, second = segment(doc)
    assert first.hyperlink_urls == ()
    assert second.hyperlink_urls == ("https://x.example/s",)


def test_hyperlink_spanning_boundary_goes_to_both():
    text = "Alpha beta gamma. Delta epsilon zeta."
    span = LinkSpan(href="https://x.example/s", start=text.index("gamma"), end=text.index("epsilon"))
    doc = _doc(TextBlock(text, links=(span,)))
    first, second = segment(doc)
    assert first.hyperlink_urls == ("https://x.example/s",)
    assert second.hyperlink_urls == ("https://x.example/s",)


def test_duplicate_hrefs_deduplicated():
    text = "One link and another link in the same sentence."
    spans = (
        LinkSpan("https://x.example/s", 0, 8),
        LinkSpan("https://x.example/s", 13, 25),
    )
    doc = _doc(TextBlock(text, links=spans))
    (unit,) = segment(doc)
    assert unit.hyperlink_urls == ("https://x.example/s",)


@given(
    st.lists(
        st.sampled_from(
            [
                "The mayor spoke downtown.",
                "Figures rose 12 percent.",
                "Nobody disputed it!",
                "Was it enough?",
                "Mr. Smith testified again.",
            ]
        ),
        min_size=1,
        max_size=8,
    )
)
def test_resegmenting_a_single_unit_is_idempotent(sentences):
    doc = _doc(TextBlock(" ".join(sentences)))
    for unit in segment(doc):
        again = segment(_doc(TextBlock(unit.text)))
        assert [u.text for u in again] == [unit.text]
