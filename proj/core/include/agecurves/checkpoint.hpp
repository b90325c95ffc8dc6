#pragma once

#include <string>

#include "agecurves/state.hpp"

namespace agecurves {

/// Self-describing chain dump: a JSON header (dims, ids, config, design meta)
/// followed by raw double blobs in a fixed order. Round-trips bit-exactly:
/// save(load(p)) reproduces the file byte for byte.
void save_draws(const PosteriorDraws& draws, const std::string& path);
PosteriorDraws load_draws(const std::string& path);

} // namespace agecurves
