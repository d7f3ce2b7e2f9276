import random

import pytest

from dialect_asr.lm import ArpaParseError, export_arpa, import_arpa, train_lm
from oracles import random_corpus


def test_round_trip_scores_within_tolerance(tmp_path):
    rng = random.Random(8)
    lm = train_lm(random_corpus(rng, 20, 150), order=3)
    export_arpa(lm, tmp_path / "lm.arpa")
    back = import_arpa(tmp_path / "lm.arpa")
    assert back.order == lm.order and back.vocab == lm.vocab
    assert back.counts_by_order() == lm.counts_by_order()
    # includes out-of-vocabulary words, which go through <unk>
    sentences = random_corpus(rng, 22, 100)
    worst = max(abs(back.score_sentence(s) - lm.score_sentence(s)) for s in sentences)
    assert worst <= 1e-4


def test_file_layout(tmp_path):
    lm = train_lm([("a", "b", "a", "b", "a")], order=2)
    export_arpa(lm, tmp_path / "lm.arpa")
    text = (tmp_path / "lm.arpa").read_text(encoding="utf-8")
    assert "\\data\\\nngram 1=5\nngram 2=4\n" in text
    assert text.rstrip().endswith("\\end\\")
    assert "-0.266268\ta b\n" in text  # p(b|a) = 0.541667
    assert "-0.301030\ta\t-0.301030\n" in text


def write(tmp_path, body: str):
    path = tmp_path / "bad.arpa"
    path.write_text(body, encoding="utf-8")
    return path


GOOD_HEAD = "\\data\\\nngram 1=2\nngram 2=5\n\n\\1-grams:\n-0.3\ta\t-0.2\n-0.3\tb\t-0.2\n\n"


def test_count_mismatch_reports_section_line(tmp_path):
    body = GOOD_HEAD + "\\2-grams:\n" + "".join(f"-0.5\t{x}\n" for x in ["a a", "a b", "b a", "b b"]) + "\n\\end\\\n"
    with pytest.raises(ArpaParseError, match="declares 5 entries but lists 4") as err:
        import_arpa(write(tmp_path, body))
    assert err.value.lineno == 9


def test_empty_data_section(tmp_path):
    with pytest.raises(ArpaParseError, match="empty"):
        import_arpa(write(tmp_path, "\\data\\\n\n\\end\\\n"))


@pytest.mark.parametrize(
    "body, lineno",
    [
        ("junk\n", 1),
        ("\\data\\\nngram one=2\n", 2),
        (GOOD_HEAD.replace("\\1-grams:", "\\1-gram:"), 5),
        (GOOD_HEAD.replace("-0.3\tb", "x\tb"), 7),
        (GOOD_HEAD.replace("-0.3\tb\t-0.2", "-0.3\tb c"), 7),
        (GOOD_HEAD, 8),
    ],
)
def test_malformed_files_report_line(tmp_path, body, lineno):
    with pytest.raises(ArpaParseError) as err:
        import_arpa(write(tmp_path, body))
    assert err.value.lineno == lineno
    assert str(err.value).startswith(f"line {lineno}:")
