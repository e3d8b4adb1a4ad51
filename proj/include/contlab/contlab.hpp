#pragma once

#include "contlab/expr.hpp"
#include "contlab/fields.hpp"
#include "contlab/characteristics.hpp"
#include "contlab/transport.hpp"
#include "contlab/continuity.hpp"
#include "contlab/norms.hpp"
#include "contlab/bounds.hpp"
#include "contlab/manufacturing.hpp"
#include "contlab/oracle.hpp"
#include "contlab/scenario.hpp"
#include "contlab/random_scenarios.hpp"
#include "contlab/report.hpp"
#include "contlab/runner.hpp"
