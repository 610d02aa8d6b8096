#pragma once

// Umbrella header.

#include "nddc/core.hpp"
#include "nddc/weights.hpp"
#include "nddc/mesh.hpp"
#include "nddc/models.hpp"
#include "nddc/integrator.hpp"
#include "nddc/diagnostics.hpp"
#include "nddc/config.hpp"
#include "nddc/sweep.hpp"
#include "nddc/theorem_suite.hpp"
#include "nddc/io.hpp"
