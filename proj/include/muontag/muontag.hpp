// Umbrella header.
#pragma once

#include "analysis.hpp"
#include "angular.hpp"
#include "coincidence.hpp"
#include "config.hpp"
#include "core.hpp"
#include "daq.hpp"
#include "fft.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "landau.hpp"
#include "manifest.hpp"
#include "materials.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "pulse.hpp"
#include "rng.hpp"
#include "sources.hpp"
#include "transport.hpp"
