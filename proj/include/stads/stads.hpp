#pragma once

// stads.hpp — umbrella header for the STaDS evaluation toolkit.

#include "stads/common.hpp"
#include "stads/corpus.hpp"
#include "stads/prompt.hpp"
#include "stads/parse.hpp"
#include "stads/metrics.hpp"
#include "stads/attribution.hpp"
#include "stads/gateway.hpp"
#include "stads/harness.hpp"
