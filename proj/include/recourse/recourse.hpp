#pragma once

#include "recourse/common.hpp"
#include "recourse/config.hpp"
#include "recourse/data.hpp"
#include "recourse/generators.hpp"
#include "recourse/metrics.hpp"
#include "recourse/network.hpp"
#include "recourse/plot.hpp"
#include "recourse/results.hpp"
#include "recourse/simulation.hpp"
#include "recourse/vae.hpp"
