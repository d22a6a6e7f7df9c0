#pragma once

#include "cafforge/catalog.hpp"
#include "cafforge/error.hpp"
#include "cafforge/forecast.hpp"
#include "cafforge/format.hpp"
#include "cafforge/gateway.hpp"
#include "cafforge/metrics.hpp"
#include "cafforge/pipeline.hpp"
#include "cafforge/promptkit.hpp"
#include "cafforge/random.hpp"
#include "cafforge/record.hpp"
#include "cafforge/series.hpp"
#include "cafforge/splitter.hpp"
#include "cafforge/timestamp.hpp"
#include "cafforge/verifier.hpp"
