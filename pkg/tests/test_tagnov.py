import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from novelty.tagnov import TagLedger, ingest, score_stream, tag_novelty
from oracles import tagnov_two_pass


def ledger_of(*tag_sets):
    led = TagLedger()
    for tags in tag_sets:
        ingest(led, tags)
    return led


def test_all_tags_already_universal():
    led = ledger_of({"a", "b"}, {"a", "b"}, {"a", "b"})
    raw, norm = tag_novelty(led, {"a", "b"})
    assert raw == 0.0 and norm == 0.0


def test_worked_three_image_example():
    # Priors {a}, {a,b}; focal {b,c}: P(b)=2/3, P(c)=1/3.
    led = ledger_of({"a"}, {"a", "b"})
    raw, norm = tag_novelty(led, {"b", "c"})
    expected_raw = -0.5 * (math.log(2 / 3) + math.log(1 / 3))
    assert raw == pytest.approx(expected_raw, abs=1e-12)
    assert raw == pytest.approx(0.75204, abs=1e-5)
    assert norm == pytest.approx(expected_raw / math.log(3), abs=1e-12)
    assert norm == pytest.approx(0.68454, abs=1e-5)


def test_brand_new_tags_hit_the_ceiling():
    led = ledger_of(*[{"old"} for _ in range(9)])
    raw, norm = tag_novelty(led, {"x", "y"})
    assert raw == pytest.approx(math.log(10), abs=1e-12)
    assert norm == 1.0


def test_tagless_image():
    led = ledger_of({"a"})
    assert tag_novelty(led, set()) == (0.0, 0.0)


def test_first_image_convention():
    raw, norm = tag_novelty(TagLedger(), {"a"})
    assert raw == 0.0  # P(a) = 1/1 with the focal image included
    assert norm == 1.0


def test_ingest_counts():
    led = ledger_of({"a"}, {"a"})
    assert led.counts["a"] == 2
    assert led.n_images == 2


def test_ingest_empty_set_still_counts_image():
    led = ledger_of({"a"}, set())
    assert led.n_images == 2
    assert led.counts["a"] == 1


def test_ingest_dedupes_within_image():
    led = TagLedger()
    ingest(led, ["a", "a", "b"])
    assert led.counts["a"] == 1


def test_replay_shuffled_then_resorted_gives_identical_ledger():
    rng = random.Random(5)
    corpus = [(i, {f"t{rng.randrange(6)}" for _ in range(rng.randrange(4))}) for i in range(40)]
    led1 = TagLedger()
    for _, tags in corpus:
        ingest(led1, tags)
    shuffled = corpus[:]
    rng.shuffle(shuffled)
    shuffled.sort(key=lambda p: p[0])
    led2 = TagLedger()
    for _, tags in shuffled:
        ingest(led2, tags)
    assert led1.counts == led2.counts and led1.n_images == led2.n_images


def test_matches_two_pass_oracle_on_random_corpora():
    rng = random.Random(99)
    for trial in range(50):
        n = rng.randrange(1, 101)
        corpus = [
            {f"t{rng.randrange(12)}" for _ in range(rng.randrange(5))} for _ in range(n)
        ]
        expected = tagnov_two_pass(corpus)
        got = score_stream(corpus)
        for e, g in zip(expected, got):
            assert g[0] == pytest.approx(e[0], abs=1e-12)
            assert g[1] == pytest.approx(e[1], abs=1e-12)


@settings(max_examples=200)
@given(
    priors=st.lists(st.sets(st.sampled_from("abcdef"), max_size=4), max_size=30),
    focal=st.sets(st.sampled_from("abcdef"), max_size=4),
)
def test_normalized_in_unit_interval(priors, focal):
    led = TagLedger()
    for tags in priors:
        ingest(led, tags)
    raw, norm = tag_novelty(led, focal)
    assert 0.0 <= norm <= 1.0
    assert raw >= 0.0


def test_duplicate_tag_priors_never_increase_normalized_novelty():
    # Keep piling on prior images that carry the focal tags; the focal
    # image's normalized novelty must be non-increasing.
    focal = {"a", "b"}
    led = ledger_of({"a", "b"}, {"c"})
    prev = tag_novelty(led, focal)[1]
    for _ in range(60):
        ingest(led, {"a", "b"})
        cur = tag_novelty(led, focal)[1]
        assert cur <= prev + 1e-12
        prev = cur
