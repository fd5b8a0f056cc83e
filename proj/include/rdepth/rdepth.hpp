#pragma once

#include "rdepth/csv.hpp"
#include "rdepth/depths.hpp"
#include "rdepth/fdata.hpp"
#include "rdepth/metrics.hpp"
#include "rdepth/neuro.hpp"
#include "rdepth/parallel.hpp"
#include "rdepth/simgen.hpp"
#include "rdepth/stats.hpp"
#include "rdepth/symmetry.hpp"
