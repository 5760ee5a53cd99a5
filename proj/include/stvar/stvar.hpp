#pragma once

#include "stvar/common.hpp"
#include "stvar/cross_validation.hpp"
#include "stvar/detrend.hpp"
#include "stvar/evaluation.hpp"
#include "stvar/io.hpp"
#include "stvar/parallel.hpp"
#include "stvar/scenario.hpp"
#include "stvar/solver.hpp"
#include "stvar/var_model.hpp"
#include "stvar/weights.hpp"
