#pragma once

#include "opesel/bandit.hpp"
#include "opesel/baseline.hpp"
#include "opesel/estimators.hpp"
#include "opesel/evaluate.hpp"
#include "opesel/nn.hpp"
#include "opesel/pasif.hpp"
#include "opesel/reward_model.hpp"
#include "opesel/rng.hpp"
#include "opesel/selection.hpp"
#include "opesel/slope.hpp"
