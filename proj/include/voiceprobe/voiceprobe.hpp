#pragma once

// Umbrella header for the voiceprobe toolkit: acoustic descriptors of
// speech recordings and the statistical battery that relates them to the
// principal dimensions of externally computed speaker embeddings.

#include "voiceprobe/audio.hpp"
#include "voiceprobe/config.hpp"
#include "voiceprobe/csv.hpp"
#include "voiceprobe/dsp.hpp"
#include "voiceprobe/embedding.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/formant.hpp"
#include "voiceprobe/gmm.hpp"
#include "voiceprobe/mathutil.hpp"
#include "voiceprobe/mlp.hpp"
#include "voiceprobe/pitch.hpp"
#include "voiceprobe/profile.hpp"
#include "voiceprobe/rng.hpp"
#include "voiceprobe/spectral.hpp"
#include "voiceprobe/stats.hpp"
#include "voiceprobe/svg.hpp"
