#pragma once

#include "penspline/harness/config.hpp"
#include "penspline/harness/data.hpp"
#include "penspline/harness/experiments.hpp"
#include "penspline/harness/results.hpp"
#include "penspline/harness/work_queue.hpp"
