#pragma once

#include "tilt/dataset.hpp"
#include "tilt/error.hpp"
#include "tilt/frontier.hpp"
#include "tilt/loss.hpp"
#include "tilt/model.hpp"
#include "tilt/numeric.hpp"
#include "tilt/random.hpp"
#include "tilt/solver.hpp"
#include "tilt/verify.hpp"
#include "tilt/version.hpp"
