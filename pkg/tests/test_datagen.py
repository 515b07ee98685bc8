import json

import numpy as np
import pytest

from vtgkit.codec import token_to_timestamp, timestamp_to_token
from vtgkit.datagen import (
    DEMO_RESPONSE,
    DEMO_USER,
    SYSTEM_PROMPT,
    TIMESTAMP_REQUEST,
    Candidate,
    DatagenConfig,
    GeneratedQa,
    HttpChatClient,
    HttpEmbeddingClient,
    Segment,
    SegmentAnnotation,
    StubChatClient,
    StubEmbeddingClient,
    assemble_record,
    build_prompt,
    parse_generation,
    read_annotations,
    retrieve_candidates,
    run_pipeline,
    sample_distractors,
    write_annotations,
)
from vtgkit.errors import (
    ClientError,
    ConfigError,
    EmptyInputError,
    GenerationFormatError,
    InsufficientDistractorsError,
    InvalidInputError,
    SchemaError,
)

SUBJ = ["the man", "a woman", "the chef", "a child", "the dog", "an artist",
        "the rider", "a dancer", "the coach", "a farmer"]
ACT = ["slices the bread on the wooden table", "paints a mural near the river",
       "fixes the wheel of a bike", "teaches the class a new song",
       "chases a ball across the yard", "builds a tower out of boxes",
       "pours water into the glass", "lifts the box onto the shelf",
       "sweeps the floor of the barn", "plants a tree beside the fence"]


def make_annotation(i):
    dur = 60.0 + 10 * i
    return SegmentAnnotation(
        video_id=f"vid{i:03d}", duration=dur,
        segments=(
            Segment(2.0, 0.3 * dur, f"{SUBJ[i]} {ACT[i]} in the morning"),
            Segment(0.35 * dur, 0.7 * dur,
                    f"{SUBJ[(i + 3) % 10]} {ACT[(i + 5) % 10]} soon after"),
            Segment(0.72 * dur, 0.95 * dur,
                    f"{SUBJ[(i + 6) % 10]} {ACT[(i + 2) % 10]} at the end"),
        ))


class FixedChat:
    model_id = "fixed"

    def __init__(self, text):
        self.text = text

    def chat(self, messages):
        return self.text


class FlakyChat:
    model_id = "flaky"

    def __init__(self, fail_first):
        self.calls = 0
        self.fail_first = fail_first
        self.inner = StubChatClient()

    def chat(self, messages):
        self.calls += 1
        if self.calls <= self.fail_first:
            raise ClientError("transient")
        return self.inner.chat(messages)


class FakeEmbed:
    """Hand-built 2D unit vectors so cosines are exact."""

    def __init__(self, table):
        self.table = table

    def embed(self, text):
        c = self.table[text]
        return np.array([c, np.sqrt(max(0.0, 1.0 - c * c))])


# --- prompt construction ---


def test_build_prompt_structure():
    ann = SegmentAnnotation("v1", 45.0, (Segment(2.0, 30.0, "a chef stirs a pot"),))
    messages = build_prompt(ann)
    assert [m["role"] for m in messages] == ["system", "user", "assistant", "user"]
    assert messages[0]["content"] == SYSTEM_PROMPT
    assert "You are a good question generator." in SYSTEM_PROMPT
    assert "(0) Avoid choosing the segment spanning across the whole video." \
        in SYSTEM_PROMPT
    assert "(4) Your answer should be a phrase no more than 7 words." in SYSTEM_PROMPT
    assert messages[1]["content"].startswith("video duration: 82.73 seconds")
    assert messages[2]["content"] == DEMO_RESPONSE
    user = messages[3]["content"]
    assert user.splitlines()[0] == "video duration: 45.00 seconds"
    assert "segment-1: [2.00, 30.00] a chef stirs a pot" in user


def test_build_prompt_needs_segments():
    with pytest.raises(EmptyInputError):
        build_prompt(SegmentAnnotation("v", 10.0, ()))


# --- response parsing ---


def test_parse_demo_response():
    qa = parse_generation(DEMO_RESPONSE, model_id="m", seed=4)
    assert qa.segment_index == 3
    assert qa.start == 56.26 and qa.end == 79.42
    assert qa.question == "What did the girl do after she ended dancing?"
    assert qa.answer == "lay on the floor"
    assert qa.model_id == "m" and qa.seed == 4


def test_parse_tolerates_reordering_case_and_noise():
    lines = DEMO_RESPONSE.splitlines()
    shuffled = "\n".join([
        "Sure! Here is the question you asked for:",
        lines[3].upper(),
        "  " + lines[0],
        lines[2],
        lines[1].replace(": ", " :  "),
        "Hope this helps.",
    ])
    qa = parse_generation(shuffled)
    base = parse_generation(DEMO_RESPONSE)
    assert (qa.segment_index, qa.start, qa.end) == \
        (base.segment_index, base.start, base.end)
    assert qa.answer.lower() == base.answer


def test_parse_missing_field():
    text = "\n".join(l for l in DEMO_RESPONSE.splitlines()
                     if not l.startswith("answer:"))
    with pytest.raises(GenerationFormatError) as e:
        parse_generation(text)
    assert e.value.field == "answer"
    with pytest.raises(GenerationFormatError):
        parse_generation("completely unrelated text")


def test_generated_qa_invariants():
    with pytest.raises(InvalidInputError):
        GeneratedQa(1, 0.0, 1.0, "q?", "ans", distractors=("a", "b", "c"))
    with pytest.raises(InvalidInputError):
        GeneratedQa(1, 0.0, 1.0, "q?", "lay on the floor",
                    distractors=("x", "y", "z", "Lay on the floor."))
    with pytest.raises(InvalidInputError):
        GeneratedQa(1, 0.0, 1.0, "q?", "   ")


# --- annotations on disk ---


def test_annotation_validation():
    with pytest.raises(InvalidInputError):
        SegmentAnnotation("v", 10.0, (Segment(5.0, 12.0, "spills over"),))
    with pytest.raises(InvalidInputError):
        SegmentAnnotation("v", 10.0, (Segment(3.0, 5.0, "   "),))
    with pytest.raises(InvalidInputError):
        SegmentAnnotation("v", -1.0, ())


def test_annotations_round_trip_and_schema_errors(tmp_path):
    anns = [make_annotation(i) for i in range(3)]
    path = tmp_path / "anns.jsonl"
    write_annotations(anns, path)
    assert read_annotations(path) == anns
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    with pytest.raises(SchemaError):
        read_annotations(bad)
    missing = tmp_path / "missing.jsonl"
    missing.write_text(json.dumps({"video_id": "v", "duration": 5.0}) + "\n")
    with pytest.raises(SchemaError):
        read_annotations(missing)
    empty = tmp_path / "empty.jsonl"
    empty.write_text("\n")
    with pytest.raises(EmptyInputError):
        read_annotations(empty)


# --- stub clients ---


def test_stub_embedding_unit_norm_and_determinism():
    emb = StubEmbeddingClient()
    for text in ("", "a dog runs", "lay on the floor", "?!"):
        v = emb.embed(text)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    a = emb.embed("the same words")
    assert np.array_equal(a, emb.embed("the same words"))
    assert not np.array_equal(a, emb.embed("different words entirely"))
    with pytest.raises(ConfigError):
        StubEmbeddingClient(dim=1)


def test_stub_chat_is_parseable_and_deterministic():
    ann = make_annotation(2)
    chat = StubChatClient()
    text = chat.chat(build_prompt(ann))
    assert text == chat.chat(build_prompt(ann))
    qa = parse_generation(text)
    assert 1 <= qa.segment_index <= len(ann.segments)
    assert 0.0 <= qa.start < qa.end <= ann.duration
    assert len(qa.answer.split()) <= 7


# --- retrieval and distractor sampling ---


def test_retrieve_ranks_by_question_similarity():
    emb = StubEmbeddingClient()
    pool = [("how does the chef cook?", "slowly"),
            ("where does the dog sleep?", "in the barn"),
            ("why does the child laugh?", "the clown fell")]
    ranked = retrieve_candidates("where does the dog sleep?", pool, emb)
    assert len(ranked) == 3
    assert ranked[0].question == "where does the dog sleep?"
    assert ranked[0].similarity == pytest.approx(1.0, abs=1e-12)
    assert ranked[0].answer == "in the barn"
    sims = [c.similarity for c in ranked]
    assert sims == sorted(sims, reverse=True)
    assert len(retrieve_candidates("a?", pool, emb, k=2)) == 2
    with pytest.raises(EmptyInputError):
        retrieve_candidates("a?", [], emb)
    with pytest.raises(InvalidInputError):
        retrieve_candidates("a?", pool, emb, k=0)


def test_sample_distractors_band_is_inclusive():
    table = {"ans": 1.0, "hi": 0.95, "top": 0.9, "mid": 0.5, "mid2": 0.6,
             "low": 0.2, "below": 0.19}
    emb = FakeEmbed(table)
    cands = [Candidate(f"q{i}", a, 0.0) for i, a in enumerate(table) if a != "ans"]
    picked = sample_distractors("ans", cands, emb, rng=np.random.default_rng(0))
    assert sorted(picked) == ["low", "mid", "mid2", "top"]
    with pytest.raises(InsufficientDistractorsError):
        sample_distractors("ans", cands, emb, band=(0.3, 0.55))


def test_sample_distractors_dedupes_and_excludes_answer():
    table = {"lay on the floor": 1.0, "Lay on the floor.": 0.5,
             "sat down": 0.5, "Sat Down.": 0.5, "stood up": 0.4,
             "ran away": 0.3, "fell over": 0.6}
    emb = FakeEmbed(table)
    cands = [Candidate(f"q{i}", a, 0.0) for i, a in enumerate(table)]
    picked = sample_distractors("lay on the floor", cands, emb,
                                rng=np.random.default_rng(1))
    assert sorted(picked) == ["fell over", "ran away", "sat down", "stood up"]
    again = sample_distractors("lay on the floor", cands, emb,
                               rng=np.random.default_rng(1))
    assert picked == again


# --- record assembly ---


def test_assemble_record_layout():
    qa = GeneratedQa(2, 10.0, 25.0, "What does the chef do?", "stirs the pot",
                     distractors=("reads a book", "waves hello",
                                  "paints a wall", "rides a bike"),
                     model_id="stub-chat", seed=9)
    rec = assemble_record(qa, np.random.default_rng(3), video_id="v7",
                          duration=50.0, chunks=120)
    assert rec["video_id"] == "v7" and rec["duration"] == 50.0
    assert sorted(rec["options"]) == sorted([qa.answer, *qa.distractors])
    pos = "ABCDE".index(rec["correct"])
    assert rec["options"][pos] == qa.answer
    assert rec["rounds"][0]["content"].startswith("What does the chef do? Options: (A) ")
    assert rec["rounds"][1]["content"] == f"Answer: ({rec['correct']}) stirs the pot"
    assert rec["rounds"][2] == {"role": "user", "content": TIMESTAMP_REQUEST}
    a = timestamp_to_token(10.0, 50.0, 120)
    b = timestamp_to_token(25.0, 50.0, 120)
    assert rec["rounds"][3]["content"] == f"From <{a}> to <{b}>."
    assert rec["gold"] == {"start": 10.0, "end": 25.0}
    assert rec["provenance"] == {"model": "stub-chat", "seed": 9}
    # time tokens recover the interval up to half a chunk width
    half = 50.0 / (2 * 120)
    assert abs(token_to_timestamp(a, 50.0, 120) - 10.0) <= half + 1e-12
    assert abs(token_to_timestamp(b, 50.0, 120) - 25.0) <= half + 1e-12
    with pytest.raises(InvalidInputError):
        assemble_record(GeneratedQa(1, 0.0, 1.0, "q?", "a"),
                        np.random.default_rng(0), video_id="v", duration=2.0)


# --- the pipeline ---


def test_pipeline_stub_run_is_deterministic(tmp_path):
    anns = [make_annotation(i) for i in range(10)]
    cfg = DatagenConfig(seed=0, backoff=0.0)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    records, stats = run_pipeline(anns, StubChatClient(), StubEmbeddingClient(),
                                  cfg, out_path=p1)
    run_pipeline(anns, StubChatClient(), StubEmbeddingClient(), cfg, out_path=p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert stats["total"] == 10
    assert stats["generated"] == 6 and stats["skipped"] == 4
    # the pool has to warm up before four in-band distractors exist
    assert stats["skip_reasons"] == {"insufficient_distractors": 4}
    assert [s["index"] for s in stats["skips"]] == [0, 1, 2, 3]
    for rec in records:
        assert len(rec["options"]) == 5
        assert rec["correct"] in "ABCDE"
        answer = rec["options"]["ABCDE".index(rec["correct"])]
        others = [o for o in rec["options"] if o != answer]
        assert len(others) == 4
        assert 0.0 <= rec["gold"]["start"] < rec["gold"]["end"] <= rec["duration"]
        assert rec["rounds"][2]["content"] == TIMESTAMP_REQUEST


def test_pipeline_all_malformed():
    anns = [make_annotation(i) for i in range(4)]
    records, stats = run_pipeline(anns, FixedChat("nothing labeled here"),
                                  StubEmbeddingClient(),
                                  DatagenConfig(backoff=0.0))
    assert records == []
    assert stats["skip_reasons"] == {"format_error": 4}


def test_pipeline_retries_then_succeeds():
    anns = [make_annotation(i) for i in range(5)]
    chat = FlakyChat(fail_first=2)
    _, stats = run_pipeline(anns, chat, StubEmbeddingClient(),
                            DatagenConfig(max_retries=2, backoff=0.0))
    assert "client_error" not in stats["skip_reasons"]
    assert chat.calls == 2 + 5  # two failures, then one call per annotation


def test_pipeline_gives_up_after_retry_budget():
    anns = [make_annotation(i) for i in range(3)]
    chat = FlakyChat(fail_first=10**9)
    _, stats = run_pipeline(anns, chat, StubEmbeddingClient(),
                            DatagenConfig(max_retries=1, backoff=0.0))
    assert stats["skip_reasons"] == {"client_error": 3}
    assert chat.calls == 6  # two attempts per annotation


def test_pipeline_validates_interval_and_answer_length():
    ann = make_annotation(0)
    out_of_range = FixedChat("chosen segment: segment-1\n"
                             "segment timestamps: [10.00, 900.00]\n"
                             "question: What happens?\n"
                             "answer: nothing")
    _, stats = run_pipeline([ann], out_of_range, StubEmbeddingClient(),
                            DatagenConfig(backoff=0.0))
    assert stats["skip_reasons"] == {"interval_out_of_range": 1}
    wordy = FixedChat("chosen segment: segment-1\n"
                      "segment timestamps: [2.00, 18.00]\n"
                      "question: What happens?\n"
                      "answer: one two three four five six seven eight")
    _, stats = run_pipeline([ann], wordy, StubEmbeddingClient(),
                            DatagenConfig(backoff=0.0))
    assert stats["skip_reasons"] == {"answer_too_long": 1}
    bad_index = FixedChat("chosen segment: segment-9\n"
                          "segment timestamps: [2.00, 18.00]\n"
                          "question: What happens?\n"
                          "answer: nothing")
    _, stats = run_pipeline([ann], bad_index, StubEmbeddingClient(),
                            DatagenConfig(backoff=0.0))
    assert stats["skip_reasons"] == {"format_error": 1}


def test_datagen_config_validation():
    with pytest.raises(ConfigError):
        DatagenConfig(top_k=0)
    with pytest.raises(ConfigError):
        DatagenConfig(band=(0.9, 0.2))
    with pytest.raises(ConfigError):
        DatagenConfig(max_retries=-1)


# --- http clients ---


def test_http_clients_require_api_key(monkeypatch):
    monkeypatch.delenv("VTGKIT_MISSING_KEY", raising=False)
    chat = HttpChatClient("http://127.0.0.1:1", "m", api_key_env="VTGKIT_MISSING_KEY")
    with pytest.raises(ConfigError):
        chat.chat([{"role": "user", "content": "hi"}])
    emb = HttpEmbeddingClient("http://127.0.0.1:1", "m",
                              api_key_env="VTGKIT_MISSING_KEY")
    with pytest.raises(ConfigError):
        emb.embed("hi")


def test_http_client_wraps_transport_failure(monkeypatch):
    monkeypatch.setenv("VTGKIT_TEST_KEY", "k")
    chat = HttpChatClient("http://127.0.0.1:9", "m", api_key_env="VTGKIT_TEST_KEY",
                          timeout=0.2)
    with pytest.raises(ClientError):
        chat.chat([{"role": "user", "content": "hi"}])
