#ifndef LSMBD_LSMBD_HPP
#define LSMBD_LSMBD_HPP

// Learned structured compressive sparse multichannel blind deconvolution:
// convolution/compression operators, the unrolled-FISTA autoencoder, the
// two-stage training pipeline, baselines, metrics, and persistence.

#include "lsmbd/adam.hpp"
#include "lsmbd/bench.hpp"
#include "lsmbd/checkpoint.hpp"
#include "lsmbd/config.hpp"
#include "lsmbd/conv.hpp"
#include "lsmbd/encoder.hpp"
#include "lsmbd/errors.hpp"
#include "lsmbd/fft.hpp"
#include "lsmbd/grad.hpp"
#include "lsmbd/io.hpp"
#include "lsmbd/lista.hpp"
#include "lsmbd/matrix.hpp"
#include "lsmbd/metrics.hpp"
#include "lsmbd/operators.hpp"
#include "lsmbd/parallel.hpp"
#include "lsmbd/rng.hpp"
#include "lsmbd/synthdata.hpp"
#include "lsmbd/training.hpp"

#endif  // LSMBD_LSMBD_HPP
