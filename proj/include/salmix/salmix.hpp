#pragma once

#include "salmix/diagnostics.hpp"
#include "salmix/distributions.hpp"
#include "salmix/em.hpp"
#include "salmix/errors.hpp"
#include "salmix/fit.hpp"
#include "salmix/gibbs.hpp"
#include "salmix/io.hpp"
#include "salmix/metrics.hpp"
#include "salmix/mixture.hpp"
#include "salmix/numerics.hpp"
#include "salmix/rng.hpp"
#include "salmix/simulate.hpp"
