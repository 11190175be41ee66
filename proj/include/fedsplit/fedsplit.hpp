#pragma once

#include "fedsplit/algorithms.hpp"
#include "fedsplit/analysis.hpp"
#include "fedsplit/blockvec.hpp"
#include "fedsplit/datagen.hpp"
#include "fedsplit/errors.hpp"
#include "fedsplit/harness.hpp"
#include "fedsplit/losses.hpp"
#include "fedsplit/problem.hpp"
#include "fedsplit/prox.hpp"
#include "fedsplit/rng.hpp"
#include "fedsplit/serialization.hpp"
#include "fedsplit/trace_io.hpp"
