#pragma once

#include "rigidkit/errors.hpp"
#include "rigidkit/framework.hpp"
#include "rigidkit/scenario.hpp"
#include "rigidkit/subspace.hpp"
#include "rigidkit/rigidity.hpp"
#include "rigidkit/hidden_modes.hpp"
#include "rigidkit/dynamics.hpp"
#include "rigidkit/report.hpp"
