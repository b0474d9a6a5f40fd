#pragma once

// Umbrella header: the full delayed-linear-control toolkit.

#include "dcl/model.hpp"
#include "dcl/optimizer.hpp"
#include "dcl/simulator.hpp"
#include "dcl/specfun.hpp"
#include "dcl/valuation.hpp"
