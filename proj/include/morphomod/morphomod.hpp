#pragma once

#include "morphomod/datagen.hpp"
#include "morphomod/errors.hpp"
#include "morphomod/harness.hpp"
#include "morphomod/inpaint.hpp"
#include "morphomod/metrics.hpp"
#include "morphomod/morphology.hpp"
#include "morphomod/pipeline.hpp"
#include "morphomod/png_io.hpp"
#include "morphomod/raster.hpp"
