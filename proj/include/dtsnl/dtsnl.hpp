/**
 * Copyright 2026 The dtsnl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "dtsnl/attention.hpp"
#include "dtsnl/audit.hpp"
#include "dtsnl/augment.hpp"
#include "dtsnl/checkpoint.hpp"
#include "dtsnl/config.hpp"
#include "dtsnl/datamodel.hpp"
#include "dtsnl/dta.hpp"
#include "dtsnl/error.hpp"
#include "dtsnl/gate.hpp"
#include "dtsnl/image.hpp"
#include "dtsnl/layers.hpp"
#include "dtsnl/losses.hpp"
#include "dtsnl/manifest.hpp"
#include "dtsnl/metrics.hpp"
#include "dtsnl/network.hpp"
#include "dtsnl/optimizer.hpp"
#include "dtsnl/random.hpp"
#include "dtsnl/sampler.hpp"
#include "dtsnl/snl.hpp"
#include "dtsnl/synth.hpp"
#include "dtsnl/tensor.hpp"
#include "dtsnl/trainer.hpp"
