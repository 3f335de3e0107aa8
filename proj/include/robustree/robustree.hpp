#pragma once

#include "robustree/cart.hpp"
#include "robustree/config.hpp"
#include "robustree/dataset.hpp"
#include "robustree/engine.hpp"
#include "robustree/errors.hpp"
#include "robustree/hof.hpp"
#include "robustree/metrics.hpp"
#include "robustree/mixed.hpp"
#include "robustree/nash.hpp"
#include "robustree/parallel.hpp"
#include "robustree/perturbation.hpp"
#include "robustree/random.hpp"
#include "robustree/report.hpp"
#include "robustree/tree.hpp"
