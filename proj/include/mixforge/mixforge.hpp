#pragma once

// Umbrella header for the MixForge augmentation engine.

#include "mixforge/cli.hpp"
#include "mixforge/config.hpp"
#include "mixforge/core.hpp"
#include "mixforge/data.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/mixers.hpp"
#include "mixforge/npy.hpp"
#include "mixforge/parallel.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/serialize.hpp"
#include "mixforge/trainer.hpp"
#include "mixforge/transforms.hpp"
