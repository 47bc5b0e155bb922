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

"""Runs the smoke tests, exiting 77 (skip) when the package is not installed."""

import pathlib
import sys

try:
    import pytest
    import scaledepth  # noqa: F401
except ImportError as e:
    print(f"skipping: {e}")
    sys.exit(77)

sys.exit(pytest.main(["-q", str(pathlib.Path(__file__).parent)]))
