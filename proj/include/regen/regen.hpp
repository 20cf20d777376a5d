#pragma once

// Convenience umbrella for the whole library.

#include "regen/actuator.hpp"
#include "regen/audit.hpp"
#include "regen/collocation.hpp"
#include "regen/controller.hpp"
#include "regen/io.hpp"
#include "regen/model.hpp"
#include "regen/reference.hpp"
#include "regen/scenario.hpp"
#include "regen/simulation.hpp"
#include "regen/solver.hpp"
