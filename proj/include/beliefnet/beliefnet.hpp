#pragma once

#include "beliefnet/beliefs.hpp"
#include "beliefnet/consensus.hpp"
#include "beliefnet/enumeration.hpp"
#include "beliefnet/fdd.hpp"
#include "beliefnet/free_energy.hpp"
#include "beliefnet/io.hpp"
#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"
#include "beliefnet/optimization.hpp"
#include "beliefnet/propagation.hpp"
