#pragma once

// Umbrella header for the proxdiv library.

#include "proxdiv/divergence.hpp"
#include "proxdiv/errors.hpp"
#include "proxdiv/estimators.hpp"
#include "proxdiv/kde.hpp"
#include "proxdiv/models.hpp"
#include "proxdiv/optimizer.hpp"
#include "proxdiv/param.hpp"
#include "proxdiv/proximal.hpp"
#include "proxdiv/quadrature.hpp"
#include "proxdiv/random.hpp"
#include "proxdiv/simulation.hpp"
