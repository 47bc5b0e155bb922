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

"""Metric depth from adaptive relative depth and a predicted scene scale."""

from scaledepth._core import (
    Model,
    ModelConfig,
    Sample,
    SceneEmbeddingTable,
    TrainConfig,
    Trainer,
    bin_centers,
    build_pseudo_embeddings,
    default_categories,
    evaluate,
    generate,
    load_depth_png,
    normalize_lengths,
    save_depth_png,
    si_loss,
)

__all__ = [
    "Model",
    "ModelConfig",
    "Sample",
    "SceneEmbeddingTable",
    "TrainConfig",
    "Trainer",
    "bin_centers",
    "build_pseudo_embeddings",
    "default_categories",
    "evaluate",
    "generate",
    "load_depth_png",
    "normalize_lengths",
    "save_depth_png",
    "si_loss",
]
