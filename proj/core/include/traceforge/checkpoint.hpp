#pragma once

#include <string>

#include "traceforge/models.hpp"

namespace traceforge::ckpt {

/// Flat binary weight archive: a JSON header describing the architecture
/// followed by named float64 tensors keyed by layer name.

void save_generator(const nets::Generator<float>& g, const std::string& path);
nets::Generator<float> load_generator(const std::string& path);

void save_classifier(const nets::Classifier<float>& c, const std::string& path);
nets::Classifier<float> load_classifier(const std::string& path);

void save_siamese(const nets::Siamese<float>& s, const std::string& path);
nets::Siamese<float> load_siamese(const std::string& path);

/// Kind string stored in a checkpoint ("generator", "classifier", "siamese").
std::string checkpoint_kind(const std::string& path);

}  // namespace traceforge::ckpt
