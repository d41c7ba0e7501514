#ifndef DCSC_DCSC_HPP
#define DCSC_DCSC_HPP

#include "dcsc/convolution.hpp"
#include "dcsc/core.hpp"
#include "dcsc/dictionary_io.hpp"
#include "dcsc/error.hpp"
#include "dcsc/fft.hpp"
#include "dcsc/freq.hpp"
#include "dcsc/graph.hpp"
#include "dcsc/image_io.hpp"
#include "dcsc/metrics.hpp"
#include "dcsc/regularizers.hpp"
#include "dcsc/rng.hpp"
#include "dcsc/solver.hpp"

#endif  // DCSC_DCSC_HPP
