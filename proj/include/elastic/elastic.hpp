#pragma once

// Umbrella header.

#include "elastic/config.hpp"
#include "elastic/contour.hpp"
#include "elastic/core.hpp"
#include "elastic/ensemble.hpp"
#include "elastic/inference.hpp"
#include "elastic/io.hpp"
#include "elastic/parallel.hpp"
#include "elastic/preshape.hpp"
#include "elastic/registration.hpp"
#include "elastic/shapestats.hpp"
#include "elastic/svg.hpp"
#include "elastic/synthetic.hpp"
