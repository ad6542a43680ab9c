#pragma once

#include "calabi/compactness.hpp"
#include "calabi/curvature.hpp"
#include "calabi/disc.hpp"
#include "calabi/errors.hpp"
#include "calabi/field.hpp"
#include "calabi/flow.hpp"
#include "calabi/grid.hpp"
#include "calabi/io.hpp"
#include "calabi/metric.hpp"
#include "calabi/operators.hpp"
#include "calabi/reduce.hpp"
#include "calabi/scenario.hpp"
#include "calabi/solver.hpp"
#include "calabi/spectral.hpp"
