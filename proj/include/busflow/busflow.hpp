#pragma once

#include "busflow/model.hpp"
#include "busflow/grid.hpp"
#include "busflow/numflux.hpp"
#include "busflow/solver.hpp"
#include "busflow/diagnostics.hpp"
#include "busflow/presets.hpp"
#include "busflow/experiments.hpp"
#include "busflow/config.hpp"
#include "busflow/output.hpp"
