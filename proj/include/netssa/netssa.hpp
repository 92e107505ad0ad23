#pragma once

#include "netssa/baselines.hpp"
#include "netssa/errors.hpp"
#include "netssa/eval.hpp"
#include "netssa/hankel.hpp"
#include "netssa/lds.hpp"
#include "netssa/mssa.hpp"
#include "netssa/simulator.hpp"
#include "netssa/timeseries.hpp"
