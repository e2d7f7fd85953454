#pragma once

#include "equicov/errors.hpp"
#include "equicov/rng.hpp"
#include "equicov/parallel.hpp"
#include "equicov/stats.hpp"
#include "equicov/format.hpp"
#include "equicov/geometry.hpp"
#include "equicov/propagation.hpp"
#include "equicov/netmodels.hpp"
#include "equicov/coverage.hpp"
#include "equicov/contours.hpp"
#include "equicov/config.hpp"
