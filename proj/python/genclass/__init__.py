# Copyright 2026 The genclass Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Source attribution of generated images with SRM residual embeddings."""

from genclass._core import *  # noqa: F401,F403
from genclass._core import Error, INPUT_SIZE, Model, Prediction, TemplateLibrary

__all__ = ["Error", "INPUT_SIZE", "Model", "Prediction", "TemplateLibrary"]
__version__ = "0.1.0"
