#pragma once

#include "fxdispatch/analysis.hpp"
#include "fxdispatch/app.hpp"
#include "fxdispatch/config.hpp"
#include "fxdispatch/dynamics.hpp"
#include "fxdispatch/errors.hpp"
#include "fxdispatch/grid_model.hpp"
#include "fxdispatch/linalg.hpp"
#include "fxdispatch/oracle.hpp"
#include "fxdispatch/params.hpp"
#include "fxdispatch/report.hpp"
#include "fxdispatch/topology.hpp"
