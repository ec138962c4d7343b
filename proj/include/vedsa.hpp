#pragma once

#include "vedsa/core.hpp"
#include "vedsa/delta.hpp"
#include "vedsa/error.hpp"
#include "vedsa/eval.hpp"
#include "vedsa/gamma.hpp"
#include "vedsa/ingest.hpp"
#include "vedsa/rng.hpp"
#include "vedsa/survdist.hpp"
#include "vedsa/synth.hpp"
#include "vedsa/tensorkit.hpp"
