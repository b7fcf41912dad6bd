#pragma once

#include "hdsim/correlation.hpp"
#include "hdsim/errors.hpp"
#include "hdsim/evalharness.hpp"
#include "hdsim/generator.hpp"
#include "hdsim/io.hpp"
#include "hdsim/linalg.hpp"
#include "hdsim/margins.hpp"
#include "hdsim/nearestcor.hpp"
#include "hdsim/normal.hpp"
#include "hdsim/parallel.hpp"
#include "hdsim/pearsonmatch.hpp"
#include "hdsim/random.hpp"
