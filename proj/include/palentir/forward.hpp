#pragma once

#include "palentir/forward/model.hpp"
#include "palentir/forward/convolution.hpp"
#include "palentir/forward/radon2d.hpp"
#include "palentir/forward/parallel3d.hpp"
#include "palentir/forward/dot2d.hpp"
