#pragma once

#include "gendice/baselines.hpp"
#include "gendice/common.hpp"
#include "gendice/dataset.hpp"
#include "gendice/divergences.hpp"
#include "gendice/env/graph.hpp"
#include "gendice/env/taxi.hpp"
#include "gendice/estimator/exact.hpp"
#include "gendice/estimator/model.hpp"
#include "gendice/estimator/objective.hpp"
#include "gendice/estimator/readout.hpp"
#include "gendice/estimator/train.hpp"
#include "gendice/experiments/config.hpp"
#include "gendice/experiments/metrics.hpp"
#include "gendice/experiments/runners.hpp"
#include "gendice/markov.hpp"
#include "gendice/nn.hpp"
#include "gendice/qlearning.hpp"
#include "gendice/random.hpp"
