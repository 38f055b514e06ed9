#pragma once

#include "aero.hpp"
#include "autoencoder.hpp"
#include "core.hpp"
#include "csrep.hpp"
#include "dataset.hpp"
#include "diffusion.hpp"
#include "geometry.hpp"
#include "metrics.hpp"
#include "nn.hpp"
#include "optimize.hpp"
#include "pipeline.hpp"
#include "svg.hpp"
