#pragma once

#include "ibfrontier/analysis.hpp"
#include "ibfrontier/errors.hpp"
#include "ibfrontier/infotheory.hpp"
#include "ibfrontier/ingest.hpp"
#include "ibfrontier/io.hpp"
#include "ibfrontier/matrix.hpp"
#include "ibfrontier/probability.hpp"
#include "ibfrontier/rng.hpp"
#include "ibfrontier/solver.hpp"
#include "ibfrontier/version.hpp"
