#pragma once

#include "mfdr/data.hpp"
#include "mfdr/distributions.hpp"
#include "mfdr/error.hpp"
#include "mfdr/fdr.hpp"
#include "mfdr/io.hpp"
#include "mfdr/kkt_stats.hpp"
#include "mfdr/model_selection.hpp"
#include "mfdr/path_solver.hpp"
#include "mfdr/sim.hpp"
