#pragma once

#include "actgrid/action_grid.hpp"
#include "actgrid/action_stats.hpp"
#include "actgrid/axis_partition.hpp"
#include "actgrid/binary_io.hpp"
#include "actgrid/ego3d.hpp"
#include "actgrid/embedding_adapt.hpp"
#include "actgrid/error.hpp"
#include "actgrid/gaussian.hpp"
#include "actgrid/grid_artifact.hpp"
#include "actgrid/verify.hpp"
