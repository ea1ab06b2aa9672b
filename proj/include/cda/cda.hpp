#pragma once

// Conceptual domain adaptation: per-domain deep de-noising auto-encoders,
// binary top-layer codes, and genetic search over constrained mapping
// matrices that align target concepts to source concepts.

#include "cda/autoencoder.hpp"
#include "cda/dataio.hpp"
#include "cda/error.hpp"
#include "cda/evalkit.hpp"
#include "cda/gasearch.hpp"
#include "cda/harness.hpp"
#include "cda/hash.hpp"
#include "cda/mapping.hpp"
#include "cda/matrix.hpp"
#include "cda/random.hpp"
