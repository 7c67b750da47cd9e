#pragma once

#include "ddsynth/errors.hpp"
#include "ddsynth/io.hpp"
#include "ddsynth/kernelbasis.hpp"
#include "ddsynth/lmi/builders.hpp"
#include "ddsynth/lmi/problem.hpp"
#include "ddsynth/matrixkit.hpp"
#include "ddsynth/model.hpp"
#include "ddsynth/sdp.hpp"
#include "ddsynth/verify.hpp"

namespace ddsynth {
inline constexpr const char* kVersion = DDSYNTH_VERSION;
}  // namespace ddsynth
