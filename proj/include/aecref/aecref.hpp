// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "aecref/features.hpp"
#include "aecref/metrics.hpp"
#include "aecref/nonlinearity.hpp"
#include "aecref/pipeline.hpp"
#include "aecref/purifier.hpp"
#include "aecref/random.hpp"
#include "aecref/room_sim.hpp"
#include "aecref/signal.hpp"
#include "aecref/speech_like.hpp"
#include "aecref/stft.hpp"
#include "aecref/wav.hpp"
#include "aecref/wiener.hpp"
