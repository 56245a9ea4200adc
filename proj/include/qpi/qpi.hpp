#pragma once

#include "qpi/adaptation.hpp"
#include "qpi/estimators.hpp"
#include "qpi/experiment.hpp"
#include "qpi/leg.hpp"
#include "qpi/model.hpp"
#include "qpi/scenario_io.hpp"
#include "qpi/simulator.hpp"
#include "qpi/types.hpp"
