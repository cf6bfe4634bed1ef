#pragma once

#include "modgrad/bundle.hpp"
#include "modgrad/charts.hpp"
#include "modgrad/curve.hpp"
#include "modgrad/errors.hpp"
#include "modgrad/family.hpp"
#include "modgrad/function.hpp"
#include "modgrad/generators.hpp"
#include "modgrad/gradient.hpp"
#include "modgrad/graph.hpp"
#include "modgrad/io.hpp"
#include "modgrad/lp.hpp"
#include "modgrad/modulus.hpp"
#include "modgrad/parallel.hpp"
#include "modgrad/plans.hpp"
#include "modgrad/rational.hpp"
#include "modgrad/report.hpp"
#include "modgrad/rng.hpp"
#include "modgrad/suites.hpp"
