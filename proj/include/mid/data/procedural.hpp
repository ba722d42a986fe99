#pragma once

#include "mid/core/image.hpp"
#include "mid/core/rng.hpp"
#include "mid/data/corpus.hpp"

namespace mid {

/// Synthetic natural-ish image: a color gradient, multi-octave value noise,
/// flat shapes with sharp edges, stripes and text-like stroke rows.
ImageTensor procedural_scene(int height, int width, int channels, RngStream& rng);

/// `count` procedural scenes named scene-0000, scene-0001, ...
ImageCorpus procedural_corpus(int count, int size, int channels, RngStream& rng);

}  // namespace mid
