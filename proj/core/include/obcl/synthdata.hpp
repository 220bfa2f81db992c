#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "obcl/tensor.hpp"

namespace obcl {

struct GeneratorConfig {
    int64_t num_classes = 16;  // K
    int64_t latent_dim = 16;
    int64_t image_feature_dim = 64;
    int64_t text_feature_dim = 64;
    double noise_std = 0.25;           // within-class spread, shared per pair
    double false_positive_rate = 0.0;  // probability the text class is resampled
    bool out_of_domain = false;        // redraw the feature maps (appendix experiment)
    uint64_t seed = 0;
};

/// Mini-batch of paired "image"/"text" features with latent class labels.
/// corrupted[i] is true iff pair i's text class was resampled (false positive).
struct PairBatch {
    Tensor image;  // (b, image_feature_dim)
    Tensor text;   // (b, text_feature_dim)
    std::vector<int64_t> labels;       // image-side class
    std::vector<int64_t> text_labels;  // text-side class (differs when corrupted)
    std::vector<uint8_t> corrupted;

    int64_t size() const { return image.rank() == 2 ? image.shape[0] : 0; }
};

/// Pure function of (config, count, batch_index): same arguments give a
/// bit-identical batch. batch_index selects independent batches of a stream.
PairBatch generate(const GeneratorConfig& config, int64_t count, uint64_t batch_index = 0);

// Columnar CSV dump/load (17 significant digits) plus JSON config sidecar.
void save_pairbatch_csv(const std::string& path, const PairBatch& batch);
PairBatch load_pairbatch_csv(const std::string& path);
void save_generator_config_json(const std::string& path, const GeneratorConfig& config);
GeneratorConfig load_generator_config_json(const std::string& path);
GeneratorConfig generator_config_from_json_text(const std::string& text);
std::string generator_config_to_json_text(const GeneratorConfig& config);

}  // namespace obcl
