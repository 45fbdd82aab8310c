#pragma once

#include "imgsmac/analysis/bstar.hpp"
#include "imgsmac/analysis/causal.hpp"
#include "imgsmac/analysis/evaluate.hpp"
#include "imgsmac/analysis/kmeans.hpp"
#include "imgsmac/analysis/sweep.hpp"
#include "imgsmac/analysis/table1.hpp"
#include "imgsmac/analysis/token_stats.hpp"
