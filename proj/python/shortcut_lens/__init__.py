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
"""Synthetic shortcut injection and adversarial lens training."""

import json

import numpy as np
import torch  # noqa: F401  (loads libtorch for the extension)

from . import _core
from ._core import ValidationError

__version__ = _core.version()

__all__ = [
    "ValidationError",
    "accuracy",
    "apply_lens",
    "cli",
    "compose",
    "desk_split",
    "gradcam",
    "inject",
    "normalize_config",
    "normalize_spec",
    "replay",
    "reproduction_loss",
    "train",
]


def desk_split(split="train", *, classes=10, per_class=500, size=32, noise=0.15,
               clutter=3, seed=1):
    """Procedural desk corpus split as (images, labels, ids, class_names)."""
    return _core.desk_split(classes, per_class, size, noise, clutter, seed, split)


def normalize_spec(spec, height=32, width=32):
    """Spec dict with every default filled in; raises ValidationError."""
    return json.loads(_core.normalize_spec(json.dumps(spec), height, width))


def normalize_config(config=None):
    """Validated experiment config with defaults filled in."""
    return json.loads(_core.normalize_config(json.dumps(config or {})))


def inject(images, labels, ids, spec):
    """Returns (perturbed images, manifest dict)."""
    out, manifest = _core.inject(images, np.asarray(labels), list(ids), json.dumps(spec))
    return out, json.loads(manifest)


def replay(manifest, images, labels, ids):
    return _core.replay(json.dumps(manifest), images, np.asarray(labels), list(ids))


def compose(images, attention, replacement):
    return _core.compose(images, attention, replacement)


def reproduction_loss(attention, rho):
    return _core.reproduction_loss(attention, rho)


def train(images, labels, out_dir, *, num_classes=None, config=None, baseline=False):
    """Trains into out_dir and returns the per-epoch history."""
    labels = np.asarray(labels)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    text = _core.train(images, labels, num_classes, json.dumps(config or {}), str(out_dir),
                       baseline)
    return [json.loads(line) for line in text.splitlines() if line]


def accuracy(classifier_path, images, labels):
    return _core.accuracy(str(classifier_path), images, np.asarray(labels))


def gradcam(classifier_path, image, target=-1):
    return _core.gradcam(str(classifier_path), image, target)


def apply_lens(lens_path, images):
    """Dict with attention, replacement and lensed image arrays."""
    return _core.apply_lens(str(lens_path), images)


def cli(*args):
    """Runs a command line; returns (exit code, stdout, stderr)."""
    return _core.cli([str(a) for a in args])
