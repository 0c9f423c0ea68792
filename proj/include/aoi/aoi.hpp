#ifndef AOI_AOI_HPP
#define AOI_AOI_HPP

#include "aoi/channel.hpp"
#include "aoi/distributions.hpp"
#include "aoi/epoch_model.hpp"
#include "aoi/error.hpp"
#include "aoi/penalty.hpp"
#include "aoi/random.hpp"
#include "aoi/simulator.hpp"
#include "aoi/solver.hpp"

#endif  // AOI_AOI_HPP
