# Copyright 2026 The shortcut-lens Authors.
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

import json

import numpy as np
import pytest

import shortcut_lens as sl


@pytest.fixture(scope="module")
def small():
    return sl.desk_split("train", per_class=3)


def test_desk_split_shapes(small):
    images, labels, ids, names = small
    assert images.shape == (30, 3, 32, 32)
    assert images.dtype == np.float32
    assert labels.tolist() == sorted(labels.tolist())
    assert len(ids) == 30 and len(names) == 10
    assert 0.0 <= images.min() and images.max() <= 1.0


def test_inject_is_deterministic_and_local(small):
    images, labels, ids, _ = small
    spec = {"kind": "color_dot", "num_classes": 10, "seed": 4}
    a, manifest = sl.inject(images, labels, ids, spec)
    b, _ = sl.inject(images, labels, ids, spec)
    assert np.array_equal(a, b)
    assert len(manifest["records"]) == 30
    changed = (a != images).any(axis=1)
    r = sl.normalize_spec(spec)["radius"]
    assert 0 < changed.sum(axis=(1, 2)).max() <= (2 * r + 1) ** 2
    assert np.array_equal(sl.replay(manifest, images, labels, ids), a)


def test_bad_spec_raises_validation_error():
    with pytest.raises(sl.ValidationError):
        sl.normalize_spec({"kind": "color_dot", "radius": 40})
    with pytest.raises(ValueError):
        sl.normalize_config({"rho": 1.5})


def test_compose_identities():
    rng = np.random.default_rng(0)
    i = rng.random((2, 3, 8, 8), dtype=np.float32)
    r = rng.random((2, 3, 8, 8), dtype=np.float32)
    zeros = np.zeros((2, 1, 8, 8), np.float32)
    assert np.array_equal(sl.compose(i, zeros, r), i)
    assert np.array_equal(sl.compose(i, zeros + 1, r), r)
    assert sl.reproduction_loss(zeros + 0.5, 0.025) == pytest.approx(0.475)


def test_train_evaluate_roundtrip(small, tmp_path):
    images, labels, _, _ = small
    cfg = sl.normalize_config({"epochs": 1, "batch_size": 10})
    hist = sl.train(images, labels, tmp_path / "run", config=cfg)
    assert len(hist) == 1 and "attention_mass" in hist[0]
    acc = sl.accuracy(tmp_path / "run" / "classifier.pt", images, labels)
    assert 0.0 <= acc <= 1.0
    cam = sl.gradcam(tmp_path / "run" / "classifier.pt", images[0])
    assert cam.shape == (32, 32) and cam.max() <= 1.0
    out = sl.apply_lens(tmp_path / "run" / "lens.pt", images[:4])
    assert out["attention"].shape == (4, 1, 32, 32)
    assert out["image"].shape == images[:4].shape


def test_cli_entry(tmp_path):
    code, out, _ = sl.cli("--help")
    assert code == 0 and "Usage" in out
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"rho": 1.5}))
    code, _, err = sl.cli("train", "--desk", "--config", bad, "--out", tmp_path / "r")
    assert code == 1 and "rho" in err
