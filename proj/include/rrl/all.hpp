#pragma once

// Convenience umbrella for the whole library.

#include "rrl/checkpoint.hpp"
#include "rrl/data.hpp"
#include "rrl/errors.hpp"
#include "rrl/geometry.hpp"
#include "rrl/harness.hpp"
#include "rrl/lbp.hpp"
#include "rrl/models.hpp"
#include "rrl/nn.hpp"
#include "rrl/rng.hpp"
#include "rrl/rrl.hpp"
#include "rrl/runtime.hpp"
#include "rrl/tensor.hpp"
