#pragma once

#include "tempoden/adam.hpp"
#include "tempoden/errors.hpp"
#include "tempoden/frame.hpp"
#include "tempoden/gradcheck.hpp"
#include "tempoden/gradcheck_suite.hpp"
#include "tempoden/metrics.hpp"
#include "tempoden/model.hpp"
#include "tempoden/noise.hpp"
#include "tempoden/ops.hpp"
#include "tempoden/parallel.hpp"
#include "tempoden/rng.hpp"
#include "tempoden/synth.hpp"
#include "tempoden/temporal_kernel.hpp"
#include "tempoden/tensor.hpp"
#include "tempoden/trainer.hpp"
#include "tempoden/version.hpp"
#include "tempoden/video_io.hpp"
