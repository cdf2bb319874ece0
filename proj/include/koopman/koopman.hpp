#pragma once

#include "koopman/benchmarks.hpp"
#include "koopman/differentiation.hpp"
#include "koopman/error.hpp"
#include "koopman/io.hpp"
#include "koopman/observables.hpp"
#include "koopman/pipeline.hpp"
#include "koopman/regression.hpp"
#include "koopman/types.hpp"
