#pragma once

#include "vito/adjoint.hpp"
#include "vito/color.hpp"
#include "vito/common.hpp"
#include "vito/config.hpp"
#include "vito/image.hpp"
#include "vito/initfit.hpp"
#include "vito/io_colmap.hpp"
#include "vito/io_image.hpp"
#include "vito/io_volume.hpp"
#include "vito/metrics.hpp"
#include "vito/optimize.hpp"
#include "vito/parallel.hpp"
#include "vito/phantom.hpp"
#include "vito/phase.hpp"
#include "vito/rerender.hpp"
#include "vito/rng.hpp"
#include "vito/sensor.hpp"
#include "vito/transport.hpp"
#include "vito/volume.hpp"
