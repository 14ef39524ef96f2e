// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_NFLOC_HPP
#define NFLOC_NFLOC_HPP

#include "nfloc/channel.hpp"
#include "nfloc/common.hpp"
#include "nfloc/csv_writer.hpp"
#include "nfloc/experiment_config.hpp"
#include "nfloc/frontend.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/likelihood.hpp"
#include "nfloc/localizer.hpp"
#include "nfloc/pipeline.hpp"
#include "nfloc/tuning.hpp"

#endif  // NFLOC_NFLOC_HPP
