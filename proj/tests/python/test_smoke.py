# Copyright 2026 The scaledepth Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest

import scaledepth as sd


def test_bin_centers_match_prefix_sums():
    rng = np.random.default_rng(0)
    lengths = rng.uniform(0.1, 1.0, size=17)
    lengths /= lengths.sum()
    expected = np.cumsum(lengths) - lengths / 2
    np.testing.assert_allclose(sd.bin_centers(lengths), expected, rtol=0, atol=1e-12)
    normalized = sd.normalize_lengths(rng.normal(size=9))
    assert normalized.min() > 0
    assert abs(normalized.sum() - 1) < 1e-12


def test_metrics_and_loss():
    gt = np.full((4, 4), 4.0)
    report = sd.evaluate(1.25 * gt, gt, max_depth=80)
    assert report["arel"] == 0.25
    assert report["delta1"] == 0.0
    assert report["delta2"] == 1.0
    assert sd.evaluate(gt, gt)["rmse"] == 0.0
    rel = gt / 8.0
    assert abs(sd.si_loss(rel, gt, gt)) < 1e-9
    with pytest.raises(ValueError):
        sd.evaluate(gt, np.ones((3, 3)))


def test_prediction_contract():
    cfg = sd.ModelConfig.tiny()
    model = sd.Model(cfg, seed=1)
    assert model.num_parameters <= 10_000
    image = np.random.default_rng(2).uniform(size=(20, 45, 3))
    out = model.predict(image)
    assert out["metric"].shape == (20, 45)
    assert out["scale"] > 0
    np.testing.assert_array_equal(out["metric"], out["relative"] * out["scale"])
    assert "scene" not in out
    again = model.predict(image)
    np.testing.assert_array_equal(out["metric"], again["metric"])

    table = sd.build_pseudo_embeddings(["a", "b", "c"], cfg.text_dim, 4)
    labeled = model.predict(image, table)
    assert labeled["scene"] in ("a", "b", "c")
    assert abs(labeled["scene_probs"].sum() - 1) < 1e-12


def test_checkpoint_and_png_round_trip(tmp_path):
    model = sd.Model(sd.ModelConfig.tiny(), seed=3)
    model.save(tmp_path / "m.sdck")
    back = sd.Model.load(tmp_path / "m.sdck")
    image = np.random.default_rng(5).uniform(size=(32, 32, 3))
    np.testing.assert_array_equal(model.predict(image)["metric"], back.predict(image)["metric"])

    sample = sd.generate("street", 80.0, seed=9, height=32, width=32)
    assert sample.image.shape == (32, 32, 3)
    assert sample.valid.all()
    sd.save_depth_png(sample.depth, sample.valid, tmp_path / "d.png")
    depth, valid = sd.load_depth_png(tmp_path / "d.png")
    np.testing.assert_array_equal(valid, sample.valid)
    assert np.abs(depth - sample.depth).max() <= 0.5 / 256 + 1e-12


def test_training_reduces_loss():
    names = [name for name, _ in sd.default_categories()]
    cfg = sd.TrainConfig.from_ini(
        "[model]\nwidth = 8\nbins = 4\nscale_queries = 2\nheads = 2\ntext_dim = 8\nffn_dim = 4\n"
        "encoder_widths = 4,4,8,8\n[optim]\nlr = 0.003\n[train]\niterations = 30\nbatch_size = 2\n"
    )
    table = sd.build_pseudo_embeddings(names, 8, 0)
    data = [sd.generate(names[i % 6], 10.0 if i % 6 < 3 else 80.0, seed=i, height=32, width=32) for i in range(2)]
    trainer = sd.Trainer(cfg, table)
    log = trainer.fit(data)
    assert len(log) == 30
    assert trainer.iteration == 30
    assert log[-1][0] < log[0][0]
