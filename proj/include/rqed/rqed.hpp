#pragma once
// Umbrella header: every module of the library.
#include "grid.hpp"
#include "freq.hpp"
#include "kernels.hpp"
#include "normal_modes.hpp"
#include "fock.hpp"
#include "wick.hpp"
#include "transform.hpp"
#include "cumulants.hpp"
#include "poly.hpp"
#include "dressing.hpp"
#include "rwa.hpp"
#include "suites.hpp"
#include "scenario.hpp"
#include "io.hpp"
#include "commands.hpp"
