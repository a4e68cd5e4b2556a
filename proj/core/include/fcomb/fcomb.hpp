#pragma once

#include "fcomb/dgp_solver.hpp"
#include "fcomb/errors.hpp"
#include "fcomb/estimation.hpp"
#include "fcomb/experiments.hpp"
#include "fcomb/inference.hpp"
#include "fcomb/rng.hpp"
#include "fcomb/scoring.hpp"
#include "fcomb/serialize.hpp"
#include "fcomb/timeseries.hpp"
