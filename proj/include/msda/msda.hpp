#pragma once

// Marginalized stacked denoising autoencoders: closed-form linear
// denoisers with analytically marginalized feature corruption, and the
// unsupervised domain-adaptation pipeline built on them.

#include "msda/classifier.hpp"
#include "msda/corpus.hpp"
#include "msda/data_matrix.hpp"
#include "msda/error.hpp"
#include "msda/eval.hpp"
#include "msda/highdim.hpp"
#include "msda/mda.hpp"
#include "msda/parallel.hpp"
#include "msda/rng.hpp"
#include "msda/serialize.hpp"
#include "msda/stack.hpp"
