import json
import re

import numpy as np
import pytest

from vtgkit.codec import timestamp_to_token, parse_grounded_text, vocab_layout
from vtgkit.curriculum import (
    STAGE_TASKS,
    TASKS,
    TEMPLATES,
    StagePlan,
    TaskSample,
    VideoSpec,
    build_example,
    default_lexicon,
    default_plans,
    grounding_exact_match,
    instruction_template,
    load_plans,
    make_task_sample,
    make_video_pool,
    memorization_pool,
    run_curriculum,
    run_stage,
    save_plans,
    stage_batch,
    task_rng,
    toy_encoder_config,
    toy_model_config,
    write_log,
)
from vtgkit.errors import ConfigError, EmptyInputError, InvalidInputError
from vtgkit.model import (
    ModelConfig,
    StagedModel,
    extend_model_vocab,
    load_checkpoint,
)
from vtgkit.tokenizer import TextTokenizer

TOK = TextTokenizer(default_lexicon())
VOCAB = vocab_layout(TOK.size, 120)
ENC = toy_encoder_config()


def small_model(seed=3):
    cfg = ModelConfig(d_model=16, n_heads=2, n_blocks=1, d_ff=24, max_len=96,
                      base_vocab=TOK.size, spatial_channels=6, temporal_channels=4,
                      eos_id=TOK.eos_id)
    return StagedModel(cfg, seed=seed)


# --- templates and sample streams ---


def test_stage_task_map():
    assert STAGE_TASKS[1] == {"captioning"}
    assert STAGE_TASKS[2] == {"grounding", "dense_captioning", "referring"}
    assert STAGE_TASKS[3] == set(TASKS)


def test_template_pool_sizes():
    assert len(TEMPLATES["captioning"]) == 10
    assert len(TEMPLATES["grounding"]) == 10
    assert len(TEMPLATES["dense_captioning"]) == 5
    assert len(TEMPLATES["referring"]) == 10


def test_instruction_template_reproducible_and_filled():
    a = instruction_template("grounding", np.random.default_rng(4), query="a dog runs")
    b = instruction_template("grounding", np.random.default_rng(4), query="a dog runs")
    assert a == b
    assert "a dog runs" in a and "<query>" not in a


def test_instruction_template_covers_whole_pool():
    rng = np.random.default_rng(0)
    seen = {instruction_template("dense_captioning", rng) for _ in range(200)}
    assert len(seen) == len(TEMPLATES["dense_captioning"])
    assert any(t.startswith("Detect and report the start and end timestamps")
               for t in seen)


def test_instruction_template_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidInputError):
        instruction_template("juggling", rng)
    with pytest.raises(InvalidInputError):
        instruction_template("grounding", rng)  # no query given


def test_task_rng_keyed_by_video_task_copy():
    v = memorization_pool(2, seed=7)[0]
    assert task_rng(v, "grounding", 0).integers(1000) == \
        task_rng(v, "grounding", 0).integers(1000)
    draws = {int(task_rng(v, t, c).integers(10**9))
             for t in TASKS for c in (0, 1)}
    assert len(draws) == 2 * len(TASKS)
    with pytest.raises(InvalidInputError):
        task_rng(v, "juggling")


# --- task samples ---


def test_captioning_sample_joins_all_events():
    v = make_video_pool(1, seed=1, max_events=3)[0]
    s = make_task_sample(v, "captioning")
    assert s.task == "captioning"
    assert "<" not in s.instruction and "<" not in s.answer
    for e in v.events:
        assert f"{e.caption}." in s.answer


def test_grounding_sample_round_trips():
    v = memorization_pool(3, seed=7)[1]
    s = make_task_sample(v, "grounding", VOCAB)
    assert v.events[0].caption in s.instruction
    parsed = parse_grounded_text(s.answer, v.duration, VOCAB)
    assert not parsed.skipped and len(parsed.events) == 1
    assert parsed.events[0].caption == v.events[0].caption


def test_dense_sample_covers_every_event():
    v = make_video_pool(1, seed=5, max_events=4)[0]
    s = make_task_sample(v, "dense_captioning", VOCAB)
    parsed = parse_grounded_text(s.answer, v.duration, VOCAB)
    assert [e.caption for e in parsed.events] == [e.caption for e in v.events]


def test_referring_copies_shift_interval_not_wording():
    v = memorization_pool(16, seed=7)[8]  # event well inside the clip
    s0 = make_task_sample(v, "referring", VOCAB, copy=0)
    s1 = make_task_sample(v, "referring", VOCAB, copy=1)
    s2 = make_task_sample(v, "referring", VOCAB, copy=2)
    tokens = lambda s: [int(m) for m in re.findall(r"<(\d+)>", s.instruction)]
    shape = lambda s: re.sub(r"<\d+>", "<>", s.instruction)
    t0 = tokens(s0)
    assert len(t0) == 2
    assert tokens(s1) == [t0[0] - 1, t0[1] - 1]
    assert tokens(s2) == [t0[0] + 1, t0[1] + 1]
    assert shape(s0) == shape(s1) == shape(s2)
    assert s0.answer == s1.answer == s2.answer
    assert s0.answer.endswith(".") and "<" not in s0.answer


def test_qa_samples_ask_about_the_subject():
    v = memorization_pool(2, seed=7)[0]
    subject = " ".join(v.events[0].caption.split()[:2])
    action = " ".join(v.events[0].caption.split()[2:])
    g = make_task_sample(v, "grounded_qa", VOCAB)
    p = make_task_sample(v, "plain_qa", VOCAB)
    for s in (g, p):
        assert f"what is {subject} doing in this video?" in s.instruction
    assert "<" in g.answer and action in g.answer
    assert p.answer == f"{action}."


def test_sample_determinism():
    v = memorization_pool(1, seed=7)[0]
    for task in TASKS:
        assert make_task_sample(v, task, VOCAB) == make_task_sample(v, task, VOCAB)


def test_sample_errors():
    v = memorization_pool(1, seed=7)[0]
    with pytest.raises(InvalidInputError):
        make_task_sample(v, "juggling", VOCAB)
    with pytest.raises(ConfigError):
        make_task_sample(v, "grounding", None)


# --- video pools ---


def test_make_video_pool_disjoint_events_distinct_captions():
    pool = make_video_pool(8, seed=2, max_events=3)
    captions = []
    for v in pool:
        assert 30.0 <= v.duration <= 300.0
        subjects = set()
        last_end = 0.0
        for e in v.events:
            assert 0.0 < e.start < e.end < v.duration
            assert e.start >= last_end
            last_end = e.end
            subjects.add(" ".join(e.caption.split()[:2]))
            captions.append(e.caption)
        assert len(subjects) == len(v.events)
    assert len(set(captions)) == len(captions)
    with pytest.raises(InvalidInputError):
        make_video_pool(0)
    with pytest.raises(InvalidInputError):
        make_video_pool(97, max_events=1)


def test_memorization_pool_tiles_the_token_range():
    pool = memorization_pool(16, seed=7)
    assert len(pool) == 16
    boundary = []
    for v in pool:
        assert len(v.events) == 1
        e = v.events[0]
        assert 0.0 <= e.start < e.end <= v.duration
        a = timestamp_to_token(e.start, v.duration, VOCAB.chunks)
        b = timestamp_to_token(e.end, v.duration, VOCAB.chunks)
        assert 2 <= b - a <= 5  # short events, a few token widths wide
        boundary += [a, b]
    assert min(boundary) < 10 and max(boundary) > 110
    assert len({v.events[0].caption for v in pool}) == 16
    with pytest.raises(InvalidInputError):
        memorization_pool(0)


# --- building model sequences ---


def test_build_example_marker_layout():
    v = memorization_pool(1, seed=7)[0]
    g = build_example(make_task_sample(v, "grounding", VOCAB), VOCAB, TOK, ENC)
    assert g.head_ids == [VOCAB.video_open_id]
    assert g.pre_ids[:2] == [VOCAB.video_close_id, VOCAB.grounded_id]
    assert g.answer_ids[-1] == TOK.eos_id
    assert any(VOCAB.is_temporal_id(i) for i in g.answer_ids)
    c = build_example(make_task_sample(v, "captioning", VOCAB), VOCAB, TOK, ENC)
    assert c.pre_ids[0] == VOCAB.video_close_id
    assert VOCAB.grounded_id not in c.pre_ids
    assert not any(VOCAB.is_temporal_id(i) for i in c.answer_ids)


def test_build_example_before_vocab_extension_has_no_markers():
    v = memorization_pool(1, seed=7)[0]
    s = make_task_sample(v, "captioning")
    ex = build_example(s, None, TOK, ENC)
    assert ex.head_ids == []
    assert ex.pre_ids == TOK.encode(s.instruction)
    assert len(ex.spatial_rows) == len(ex.temporal_rows)


def test_build_example_rejects_answer_outside_lexicon():
    v = memorization_pool(1, seed=7)[0]
    s = TaskSample(video=v, task="captioning",
                   instruction="Describe the following video concisely.",
                   answer="a quokka flies.")
    with pytest.raises(InvalidInputError):
        build_example(s, VOCAB, TOK, ENC)


def test_video_spec_round_trips_through_dict():
    v = make_video_pool(1, seed=9, max_events=2)[0]
    assert VideoSpec.from_dict(v.to_dict()) == v


# --- stage plans ---


def test_stage_plan_validation():
    ok = dict(weights={"captioning": 1.0}, steps=5, learning_rates={"projectors": 0.1})
    StagePlan(stage=1, **ok)
    with pytest.raises(ConfigError):
        StagePlan(stage=4, **ok)
    with pytest.raises(ConfigError):
        StagePlan(stage=2, **ok)  # captioning not trained during alignment
    with pytest.raises(ConfigError):
        StagePlan(stage=1, weights={"captioning": -1.0}, steps=5,
                  learning_rates={"projectors": 0.1})
    with pytest.raises(ConfigError):
        StagePlan(stage=1, weights={"captioning": 0.0}, steps=5,
                  learning_rates={"projectors": 0.1})
    with pytest.raises(ConfigError):
        StagePlan(stage=1, weights={"captioning": 1.0}, steps=0,
                  learning_rates={"projectors": 0.1})
    with pytest.raises(ConfigError):
        StagePlan(stage=1, weights={"captioning": 1.0}, steps=5,
                  learning_rates={"projectors": -0.1})
    with pytest.raises(ConfigError):
        StagePlan(stage=1, weights={"captioning": 1.0}, steps=5,
                  learning_rates={"projectors": 0.1}, lr_decay=0.0)


def test_plans_round_trip_through_json(tmp_path):
    plans = default_plans(seed=11)
    path = tmp_path / "plans.json"
    save_plans(plans, path)
    assert load_plans(path) == plans
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps([p.to_dict() for p in plans]))
    assert load_plans(bare) == plans
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps([{"stage": 1}]))
    with pytest.raises(ConfigError):
        load_plans(broken)
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    with pytest.raises(ConfigError):
        load_plans(empty)


def test_default_plans_shape():
    plans = default_plans(seed=0)
    assert [p.stage for p in plans] == [1, 2, 3]
    for p in plans:
        assert set(p.weights) <= STAGE_TASKS[p.stage]
    assert default_plans(stages=(2,))[0].stage == 2
    with pytest.raises(ConfigError):
        default_plans(stages=(1, 5))
    assert toy_model_config(TOK).base_vocab == TOK.size


def test_stage_batch_integer_weights_and_determinism():
    pool = memorization_pool(3, seed=7)
    plan = StagePlan(1, {"captioning": 2.0}, 5, {"projectors": 0.1}, seed=0)
    batch = stage_batch(plan, pool, None)
    assert len(batch) == 2 * len(pool)
    assert batch == stage_batch(plan, pool, None)
    with pytest.raises(EmptyInputError):
        stage_batch(plan, [], None)


# --- stage training ---


def test_run_stage_prerequisites():
    pool = memorization_pool(2, seed=7)
    model = small_model()
    plan2 = StagePlan(2, {"grounding": 1.0}, 2,
                      {"embed": 0.1, "head": 0.1}, seed=0)
    with pytest.raises(ConfigError):
        run_stage(model, plan2, pool, TOK, ENC)  # vocabulary never extended
    extend_model_vocab(model, VOCAB, seed=0)
    plan3 = StagePlan(3, {"grounding": 1.0}, 2, {"adapters": 0.1}, seed=0)
    with pytest.raises(ConfigError):
        run_stage(model, plan3, pool, TOK, ENC)  # adapters never attached


def test_stage1_touches_only_projectors():
    pool = memorization_pool(2, seed=7)
    model = small_model()
    frozen = {name: model.params[name].tobytes() for name in model.params
              if not name.startswith("proj_")}
    proj_before = {name: model.params[name].tobytes() for name in model.params
                   if name.startswith("proj_")}
    plan = StagePlan(1, {"captioning": 1.0}, 3, {"projectors": 0.05}, seed=0)
    records = run_stage(model, plan, pool, TOK, ENC)
    for name, before in frozen.items():
        assert model.params[name].tobytes() == before, name
    assert any(model.params[n].tobytes() != proj_before[n] for n in proj_before)
    steps = [r for r in records if r["event"] == "step"]
    assert len(steps) == plan.steps
    assert records[0]["event"] == "stage_start"
    assert records[0]["trainable"] == ["projectors"]
    assert model.stage == 1


def test_stage1_loss_non_increasing_at_small_lr():
    pool = memorization_pool(1, seed=7)
    model = small_model()
    plan = StagePlan(1, {"captioning": 1.0}, 20, {"projectors": 0.01}, seed=0)
    losses = [r["loss"] for r in run_stage(model, plan, pool, TOK, ENC)
              if r["event"] == "step"]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_short_alignment_run_halves_the_loss():
    pool = memorization_pool(4, seed=7)
    model = small_model()
    plans = [
        StagePlan(1, {"captioning": 1.0}, 5, {"projectors": 0.05}, seed=0),
        StagePlan(2, {"grounding": 1.0}, 40,
                  {"projectors": 0.1, "embed": 1.0, "head": 1.0}, seed=0),
    ]
    records = run_curriculum(model, plans, pool, TOK, ENC, VOCAB)
    stage2 = [r["loss"] for r in records
              if r["event"] == "step" and r["stage"] == 2]
    assert stage2[-1] < 0.5 * stage2[0]


# --- the full curriculum ---


def test_run_curriculum_grows_model_once_and_checkpoints(tmp_path):
    pool = memorization_pool(2, seed=7)
    model = small_model()
    base_rows = model.params["embed"].shape[0]
    plans = [
        StagePlan(1, {"captioning": 1.0}, 2, {"projectors": 0.05}, seed=0),
        StagePlan(2, {"grounding": 1.0}, 2, {"embed": 0.1, "head": 0.1}, seed=0),
        StagePlan(3, {"grounding": 1.0, "plain_qa": 1.0}, 2, {"adapters": 0.05}, seed=0),
    ]
    records = run_curriculum(model, plans, pool, TOK, ENC, VOCAB, out_dir=tmp_path)
    assert model.params["embed"].shape[0] == base_rows + VOCAB.chunks + 1 + 3
    starts = [r for r in records if r["event"] == "stage_start"]
    assert [s["stage"] for s in starts] == [1, 2, 3]
    assert "vocab_extended_to" not in starts[0]
    assert starts[1]["vocab_extended_to"] == VOCAB.total_size
    assert "vocab_extended_to" not in starts[2]
    assert "alignment_skipped" not in starts[1]
    assert starts[2]["adapter_params_added"] > 0
    assert starts[2]["adapter_params"] > 0
    for n in (1, 2, 3):
        assert (tmp_path / f"stage{n}.ckpt").exists()
    loaded = load_checkpoint(tmp_path / "stage3.ckpt")
    assert loaded.vocab is not None and loaded.has_adapters
    assert loaded.params["embed"].tobytes() == model.params["embed"].tobytes()


def test_run_curriculum_is_deterministic():
    pool = memorization_pool(2, seed=7)
    plans = [
        StagePlan(1, {"captioning": 1.0}, 2, {"projectors": 0.05}, seed=0),
        StagePlan(2, {"grounding": 1.0}, 3, {"embed": 0.2, "head": 0.2}, seed=0),
    ]
    runs = []
    for _ in range(2):
        model = small_model(seed=5)
        records = run_curriculum(model, plans, pool, TOK, ENC, VOCAB, seed=0)
        runs.append((records, {n: p.tobytes() for n, p in model.params.items()}))
    assert runs[0][0] == runs[1][0]
    assert runs[0][1] == runs[1][1]


def test_run_curriculum_stage_order_and_base_mismatch():
    pool = memorization_pool(1, seed=7)
    plans21 = [
        StagePlan(2, {"grounding": 1.0}, 1, {"embed": 0.1}, seed=0),
        StagePlan(1, {"captioning": 1.0}, 1, {"projectors": 0.1}, seed=0),
    ]
    with pytest.raises(ConfigError):
        run_curriculum(small_model(), plans21, pool, TOK, ENC, VOCAB)
    dup = [StagePlan(1, {"captioning": 1.0}, 1, {"projectors": 0.1}, seed=0)] * 2
    with pytest.raises(ConfigError):
        run_curriculum(small_model(), dup, pool, TOK, ENC, VOCAB)
    with pytest.raises(ConfigError):
        run_curriculum(small_model(), [], pool, TOK, ENC, VOCAB)
    other = vocab_layout(TOK.size + 1, VOCAB.chunks)
    plan1 = [StagePlan(1, {"captioning": 1.0}, 1, {"projectors": 0.1}, seed=0)]
    with pytest.raises(ConfigError):
        run_curriculum(small_model(), plan1, pool, TOK, ENC, other)


def test_skipping_alignment_stage_is_flagged():
    pool = memorization_pool(1, seed=7)
    model = small_model()
    plans = [
        StagePlan(1, {"captioning": 1.0}, 1, {"projectors": 0.05}, seed=0),
        StagePlan(3, {"grounding": 1.0}, 1, {"adapters": 0.05}, seed=0),
    ]
    records = run_curriculum(model, plans, pool, TOK, ENC, VOCAB)
    start3 = next(r for r in records
                  if r["event"] == "stage_start" and r["stage"] == 3)
    assert start3["alignment_skipped"] is True
    assert start3["vocab_extended_to"] == VOCAB.total_size


def test_write_log_is_one_json_object_per_line(tmp_path):
    records = [{"event": "stage_start", "stage": 1}, {"event": "step", "loss": 0.5}]
    path = tmp_path / "log.jsonl"
    write_log(records, path)
    lines = path.read_text().splitlines()
    assert [json.loads(l) for l in lines] == records


def test_grounding_exact_match_bounds_and_errors():
    pool = memorization_pool(2, seed=7)
    model = small_model()
    with pytest.raises(ConfigError):
        grounding_exact_match(model, pool, TOK, ENC)
    extend_model_vocab(model, VOCAB, seed=0)
    with pytest.raises(EmptyInputError):
        grounding_exact_match(model, [], TOK, ENC)
    em = grounding_exact_match(model, pool, TOK, ENC)
    assert 0.0 <= em <= 1.0
