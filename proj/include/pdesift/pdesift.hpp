#pragma once

// Umbrella header.
#include "pdesift/error.hpp"
#include "pdesift/grid.hpp"
#include "pdesift/stencil.hpp"
#include "pdesift/differentiation.hpp"
#include "pdesift/basis.hpp"
#include "pdesift/pde_model.hpp"
#include "pdesift/solvers.hpp"
#include "pdesift/systems.hpp"
#include "pdesift/dictionary.hpp"
#include "pdesift/stridge.hpp"
#include "pdesift/ssvb.hpp"
#include "pdesift/io.hpp"
#include "pdesift/experiment.hpp"
