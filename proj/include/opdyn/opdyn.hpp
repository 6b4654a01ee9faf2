#pragma once

#include "opdyn/analysis.hpp"
#include "opdyn/asch.hpp"
#include "opdyn/dynamics.hpp"
#include "opdyn/graph.hpp"
#include "opdyn/linalg.hpp"
#include "opdyn/random.hpp"
#include "opdyn/steady_state.hpp"
#include "opdyn/types.hpp"
