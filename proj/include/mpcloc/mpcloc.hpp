#pragma once

#include "mpcloc/assoc.hpp"
#include "mpcloc/chansim.hpp"
#include "mpcloc/core.hpp"
#include "mpcloc/distest.hpp"
#include "mpcloc/experiment.hpp"
#include "mpcloc/geom.hpp"
#include "mpcloc/likelihood.hpp"
#include "mpcloc/posest.hpp"
#include "mpcloc/rng.hpp"
