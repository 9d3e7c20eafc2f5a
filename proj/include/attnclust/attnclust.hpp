#pragma once

#include "attnclust/attention.hpp"
#include "attnclust/errors.hpp"
#include "attnclust/metrics.hpp"
#include "attnclust/mixtures.hpp"
#include "attnclust/moments.hpp"
#include "attnclust/optimize.hpp"
#include "attnclust/parallel.hpp"
#include "attnclust/risk.hpp"
#include "attnclust/rng.hpp"
