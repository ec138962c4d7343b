#pragma once

#include "vedsa/tensorkit/adam.hpp"
#include "vedsa/tensorkit/checkpoint.hpp"
#include "vedsa/tensorkit/gradcheck.hpp"
#include "vedsa/tensorkit/layers.hpp"
#include "vedsa/tensorkit/ops.hpp"
#include "vedsa/tensorkit/tape.hpp"
