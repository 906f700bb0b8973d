// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nastereo/camera.hpp"
#include "nastereo/config.hpp"
#include "nastereo/consistency.hpp"
#include "nastereo/error.hpp"
#include "nastereo/evalkit.hpp"
#include "nastereo/image.hpp"
#include "nastereo/io.hpp"
#include "nastereo/normals.hpp"
#include "nastereo/refine.hpp"
#include "nastereo/scenegen.hpp"
#include "nastereo/sweep.hpp"
