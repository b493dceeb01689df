#pragma once

#include "epinet/error.hpp"
#include "epinet/types.hpp"
#include "epinet/network.hpp"
#include "epinet/model.hpp"
#include "epinet/spectral.hpp"
#include "epinet/mobility.hpp"
#include "epinet/dynamics.hpp"
#include "epinet/travel_opt.hpp"
#include "epinet/quarantine_opt.hpp"
#include "epinet/policy.hpp"
#include "epinet/scenario.hpp"
