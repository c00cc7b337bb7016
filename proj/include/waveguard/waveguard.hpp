#pragma once

// Umbrella header: adversarial-audio detection via input transformations,
// CER-based detection, distortion metrics, and the desk-scale adaptive
// attack harness.

#include "waveguard/attack.hpp"
#include "waveguard/audio.hpp"
#include "waveguard/detector.hpp"
#include "waveguard/dsp.hpp"
#include "waveguard/lpc.hpp"
#include "waveguard/mel.hpp"
#include "waveguard/metrics.hpp"
#include "waveguard/rng.hpp"
#include "waveguard/transcribe.hpp"
#include "waveguard/transforms.hpp"
