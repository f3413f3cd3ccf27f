#pragma once

// Everything: networks, critics, data, physics, baselines, training,
// dimension estimates and the recipe driver.

#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"
#include "dimest/autonet.hpp"
#include "dimest/critics.hpp"
#include "dimest/datagen.hpp"
#include "dimest/physics.hpp"
#include "dimest/baselines.hpp"
#include "dimest/trainer.hpp"
#include "dimest/dimension.hpp"
#include "dimest/output.hpp"
#include "dimest/experiment.hpp"
#include "dimest/scaling.hpp"
#include "dimest/recipes.hpp"
