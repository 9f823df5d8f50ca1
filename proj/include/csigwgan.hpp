#pragma once

#include "csigwgan/matrix.hpp"
#include "csigwgan/tensor_algebra.hpp"
#include "csigwgan/paths.hpp"
#include "csigwgan/signature.hpp"
#include "csigwgan/rng.hpp"
#include "csigwgan/sde.hpp"
#include "csigwgan/autodiff.hpp"
#include "csigwgan/nn.hpp"
#include "csigwgan/generator.hpp"
#include "csigwgan/sigw1.hpp"
#include "csigwgan/kalman.hpp"
#include "csigwgan/experiment.hpp"
