#pragma once

/// \file covcon.hpp
/// \brief Umbrella header: samplers, spectral kernels, estimators, bounds,
/// the Monte Carlo driver and the result serializers.

#include "covcon/error.hpp"
#include "covcon/rng.hpp"
#include "covcon/parallel.hpp"
#include "covcon/sampler.hpp"
#include "covcon/matrix_io.hpp"
#include "covcon/linalg.hpp"
#include "covcon/quadrature.hpp"
#include "covcon/statistics.hpp"
#include "covcon/bounds.hpp"
#include "covcon/experiments.hpp"
#include "covcon/config.hpp"
#include "covcon/report.hpp"
#include "covcon/plot.hpp"
#include "covcon/bundle.hpp"
