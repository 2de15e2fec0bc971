#pragma once

#include "bdlp/analysis.hpp"
#include "bdlp/estimators.hpp"
#include "bdlp/harmonic.hpp"
#include "bdlp/kernel.hpp"
#include "bdlp/moments.hpp"
#include "bdlp/params.hpp"
#include "bdlp/scenario.hpp"
#include "bdlp/simulator.hpp"
#include "bdlp/space.hpp"
