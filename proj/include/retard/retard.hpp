#pragma once

#include "retard/config.hpp"
#include "retard/errors.hpp"
#include "retard/experiments.hpp"
#include "retard/fundsol.hpp"
#include "retard/io.hpp"
#include "retard/measures.hpp"
#include "retard/noise.hpp"
#include "retard/parallel.hpp"
#include "retard/simulate.hpp"
#include "retard/spectrum.hpp"
#include "retard/stationarity.hpp"
#include "retard/voc.hpp"
