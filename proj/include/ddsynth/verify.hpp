#pragma once

#include "ddsynth/verify/simulate.hpp"
#include "ddsynth/verify/spectral.hpp"
#include "ddsynth/verify/sweep.hpp"
