#pragma once

#include "tsaudit/core.hpp"
#include "tsaudit/error.hpp"
#include "tsaudit/rng.hpp"
#include "tsaudit/parallel.hpp"
#include "tsaudit/oneliner.hpp"
#include "tsaudit/discord.hpp"
#include "tsaudit/diagnostics.hpp"
#include "tsaudit/scoring.hpp"
#include "tsaudit/perturb.hpp"
#include "tsaudit/ingest.hpp"
#include "tsaudit/report.hpp"
#include "tsaudit/plot.hpp"
#include "tsaudit/detectors.hpp"
#include "tsaudit/audit.hpp"
