#pragma once

#include "jointfair/core.hpp"
#include "jointfair/data.hpp"
#include "jointfair/error.hpp"
#include "jointfair/metrics.hpp"
#include "jointfair/models.hpp"
#include "jointfair/penalty.hpp"
#include "jointfair/rng.hpp"
#include "jointfair/simulation.hpp"
#include "jointfair/smoothing.hpp"
#include "jointfair/solver.hpp"
#include "jointfair/tuning.hpp"
