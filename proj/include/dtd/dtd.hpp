#pragma once

#include "dtd/algorithms.hpp"
#include "dtd/config.hpp"
#include "dtd/csv.hpp"
#include "dtd/error.hpp"
#include "dtd/fixedpoint.hpp"
#include "dtd/instance_io.hpp"
#include "dtd/metrics.hpp"
#include "dtd/model.hpp"
#include "dtd/navigation.hpp"
#include "dtd/rng.hpp"
#include "dtd/source.hpp"
#include "dtd/svg.hpp"
#include "dtd/synthetic.hpp"
#include "dtd/topology.hpp"
#include "dtd/trials.hpp"
