#pragma once

#include "penspline/dr_basis.hpp"
#include "penspline/error.hpp"
#include "penspline/estimators.hpp"
#include "penspline/priors.hpp"
#include "penspline/random.hpp"
#include "penspline/sampler.hpp"
#include "penspline/spline_basis.hpp"
#include "penspline/stats.hpp"
