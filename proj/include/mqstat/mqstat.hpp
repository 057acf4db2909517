#ifndef MQSTAT_MQSTAT_HPP
#define MQSTAT_MQSTAT_HPP

#include "mqstat/asymptotics.hpp"
#include "mqstat/calculus.hpp"
#include "mqstat/errors.hpp"
#include "mqstat/expression.hpp"
#include "mqstat/functions.hpp"
#include "mqstat/ks.hpp"
#include "mqstat/model.hpp"
#include "mqstat/parallel.hpp"
#include "mqstat/quadrature.hpp"
#include "mqstat/quantile_stat.hpp"
#include "mqstat/rng.hpp"
#include "mqstat/simulate.hpp"
#include "mqstat/special.hpp"

#endif // MQSTAT_MQSTAT_HPP
