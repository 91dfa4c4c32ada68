#pragma once

#include "bermudan/dual_martingale.hpp"
#include "bermudan/error.hpp"
#include "bermudan/estimators.hpp"
#include "bermudan/harness.hpp"
#include "bermudan/market.hpp"
#include "bermudan/oracle.hpp"
#include "bermudan/parallel.hpp"
#include "bermudan/regression.hpp"
#include "bermudan/rng.hpp"
#include "bermudan/stopping.hpp"
