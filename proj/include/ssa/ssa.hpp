#pragma once

// Everything except the CLI driver (ssa/cli.hpp), which pulls in CLI11.

#include "ssa/core/error.hpp"
#include "ssa/core/nelder_mead.hpp"
#include "ssa/core/parallel.hpp"
#include "ssa/core/rng.hpp"
#include "ssa/core/stats.hpp"
#include "ssa/engine.hpp"
#include "ssa/io/config.hpp"
#include "ssa/io/csv.hpp"
#include "ssa/io/dataset.hpp"
#include "ssa/io/report.hpp"
#include "ssa/knn.hpp"
#include "ssa/models/longitudinal.hpp"
#include "ssa/models/mean.hpp"
#include "ssa/models/meta.hpp"
#include "ssa/models/regression.hpp"
#include "ssa/permute.hpp"
#include "ssa/types.hpp"
