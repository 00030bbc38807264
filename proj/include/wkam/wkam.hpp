// Copyright 2026 The wkam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file wkam.hpp
/// @brief Umbrella header.

#pragma once

#include "wkam/errors.hpp"
#include "wkam/parallel.hpp"
#include "wkam/core.hpp"
#include "wkam/laxoleinik.hpp"
#include "wkam/simplex.hpp"
#include "wkam/measures.hpp"
#include "wkam/alpha.hpp"
#include "wkam/verify.hpp"
#include "wkam/subsolution.hpp"
#include "wkam/io.hpp"
#include "wkam/config.hpp"
#include "wkam/pipeline.hpp"
#include "wkam/cli.hpp"
