// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binsoinn/binviz.hpp"
#include "binsoinn/error.hpp"
#include "binsoinn/features.hpp"
#include "binsoinn/hilbert.hpp"
#include "binsoinn/model_store.hpp"
#include "binsoinn/pipeline.hpp"
#include "binsoinn/png.hpp"
#include "binsoinn/soinn.hpp"
