#pragma once

#include "bitweight/core.hpp"
#include "bitweight/eval.hpp"
#include "bitweight/hashing.hpp"
#include "bitweight/io.hpp"
#include "bitweight/learner.hpp"
#include "bitweight/online.hpp"
#include "bitweight/pipeline.hpp"
#include "bitweight/ranking.hpp"
#include "bitweight/sampler.hpp"
