#pragma once

#include "composition.hpp"
#include "config.hpp"
#include "error.hpp"
#include "flow_dynamics.hpp"
#include "ib_mitigation.hpp"
#include "ib_wormhole.hpp"
#include "link_models.hpp"
#include "oob_mitigation.hpp"
#include "passivity_audit.hpp"
#include "plant.hpp"
#include "plots.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "topology.hpp"
#include "trace_io.hpp"
