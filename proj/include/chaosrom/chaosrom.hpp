#pragma once

#include "chaosrom/errors.hpp"
#include "chaosrom/sphere.hpp"
#include "chaosrom/ode.hpp"
#include "chaosrom/random.hpp"
#include "chaosrom/lorenz96.hpp"
#include "chaosrom/io.hpp"
#include "chaosrom/nn.hpp"
#include "chaosrom/tensor.hpp"
#include "chaosrom/dmd.hpp"
#include "chaosrom/quadratic.hpp"
#include "chaosrom/neural.hpp"
#include "chaosrom/rom_model.hpp"
#include "chaosrom/eval.hpp"
#include "chaosrom/persistence.hpp"
