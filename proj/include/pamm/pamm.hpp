#ifndef PAMM_PAMM_HPP
#define PAMM_PAMM_HPP

#include "pamm/beliefs.hpp"
#include "pamm/clearing.hpp"
#include "pamm/curve.hpp"
#include "pamm/engine.hpp"
#include "pamm/errors.hpp"
#include "pamm/experiment.hpp"
#include "pamm/loss.hpp"
#include "pamm/orders.hpp"
#include "pamm/pool.hpp"
#include "pamm/report.hpp"
#include "pamm/scenario.hpp"
#include "pamm/trace.hpp"
#include "pamm/verify.hpp"

#endif
