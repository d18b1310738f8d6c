#pragma once

#include "memsync/align.hpp"
#include "memsync/categories.hpp"
#include "memsync/channels.hpp"
#include "memsync/core.hpp"
#include "memsync/error.hpp"
#include "memsync/estimate.hpp"
#include "memsync/gof.hpp"
#include "memsync/io.hpp"
#include "memsync/pipeline.hpp"
#include "memsync/rng.hpp"
#include "memsync/runstats.hpp"
