#pragma once

// Umbrella header for the whole library.

#include "lode/camera.hpp"
#include "lode/errors.hpp"
#include "lode/eval.hpp"
#include "lode/fitting.hpp"
#include "lode/mask.hpp"
#include "lode/pnm.hpp"
#include "lode/synth.hpp"
