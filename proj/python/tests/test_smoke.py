import math

import pytest

import cot3d

GOLD = {
    "object_recognition": "This is a mug with a curved handle.",
    "functional_inference": "The handle can be grasped.",
    "causal_reasoning": "Grasping the handle lifts the mug that holds liquid.",
    "conclusion": "The mug holds liquid.",
}


def test_render_parse_round_trip():
    tagged = cot3d.render(GOLD, "tagged")
    assert tagged.startswith("<think>")
    assert cot3d.parse_tagged(tagged) == GOLD
    assert cot3d.convert(tagged, "tagged", "unmarked") == cot3d.render(GOLD, "unmarked")
    assert cot3d.render(GOLD, "none") == GOLD["conclusion"]
    assert cot3d.validate(GOLD, "tagged") == []


def test_validation_errors_carry_codes():
    with pytest.raises(cot3d.ValidationError, match="MISSING_THINK_BLOCK"):
        cot3d.parse_tagged("no markers here")
    bad = dict(GOLD, functional_inference="")
    assert cot3d.validate(bad, "tagged")[0][0] == "MISSING_STAGE_2"
    with pytest.raises(cot3d.DataError):
        cot3d.render(GOLD, "fancy")


def test_geometry_and_loss():
    pts = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]
    assert cot3d.farthest_point_sample(pts, 2, 0) == [0, 3]
    row = [[1.0, 0.0]]
    assert cot3d.info_nce_loss(row, row, 0.5) == 0.0
    same = [[1.0, 0.0]] * 4
    assert abs(cot3d.info_nce_loss(same, same, 0.5) - math.log(4)) < 1e-9
    eye = [[1.0, 0.0], [0.0, 1.0]]
    assert abs(cot3d.info_nce_loss(eye, eye, 1.0) - math.log1p(math.exp(-1))) < 1e-9


def test_schedule():
    assert cot3d.lr_at(0, 1000) == 0.0
    assert cot3d.lr_at(30, 1000) == 2e-3
    assert cot3d.lr_at(30, 1000, stage=2) == 2e-5
    assert abs(cot3d.lr_at(1000, 1000)) <= 1e-12


def test_scores():
    s = cot3d.score(cot3d.render(GOLD, "tagged"), GOLD)
    assert s == {"obj": 5.0, "func": 5.0, "inter": 5.0, "tru": 5.0, "comp": 5.0}
    s = cot3d.score(GOLD["conclusion"], GOLD)
    assert s["obj"] is None and s["tru"] == 5.0


def test_dataset_and_shapes(tmp_path):
    g = cot3d.generate_shape("mug", seed=3, n_points=64)
    assert len(g["points"]) == 64
    assert "mug" in g["gold"]["object_recognition"]

    recs = cot3d.split_dataset(cot3d.build_dataset(10, seed=1, points_per_shape=32), seed=1)
    assert len(recs) == 20
    assert sorted({r["split"] for r in recs}) == ["test", "train", "val"]
    path = tmp_path / "r.jsonl"
    cot3d.write_records(recs, str(path))
    assert cot3d.read_records(str(path)) == recs
    with pytest.raises(cot3d.DataError):
        cot3d.read_records(str(tmp_path / "missing.jsonl"))


def test_train_and_evaluate(tmp_path):
    recs = cot3d.split_dataset(cot3d.build_dataset(10, seed=2, points_per_shape=64), seed=2)
    ckpt = str(tmp_path / "s1.ckpt")
    info = cot3d.train(recs, ckpt, stage=1, epochs=2, batch_size=8, seed=2)
    assert info["step"] == 4
    assert len(info["epoch_losses"]) == 2
    test = [r for r in recs if r["split"] == "test"]
    ev = cot3d.evaluate(ckpt, test)
    assert 0.0 <= ev["top1"] <= 1.0
    assert "mean ± standard deviation" in ev["report"]
    assert len(ev["outputs"]) == len(test)

    s2 = str(tmp_path / "s2.ckpt")
    info2 = cot3d.train(recs, s2, stage=2, init_checkpoint=ckpt, epochs=1, batch_size=8, preset="llm_like")
    assert info2["step"] == 6
    with pytest.raises(cot3d.ConfigError):
        cot3d.train(recs, s2, stage=2)


def test_cli_in_process(tmp_path):
    assert cot3d.run_cli(["gen", "--n", "10", "--points", "16", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "test.jsonl").exists()
    assert cot3d.run_cli(["validate", "--in", str(tmp_path / "train.jsonl")]) == 0
    assert cot3d.run_cli(["gen", "--bogus"]) == 2
