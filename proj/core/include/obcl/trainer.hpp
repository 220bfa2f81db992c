#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "obcl/distance.hpp"
#include "obcl/loss.hpp"
#include "obcl/metrics.hpp"
#include "obcl/synthdata.hpp"
#include "obcl/tensor.hpp"

namespace obcl {

enum class EncoderChoice { Mlp, Transformer };

struct TransformerSettings {
    int64_t layers = 2;
    int64_t heads = 2;
    int64_t model_dim = 32;
    int64_t ff_dim = 64;
    int64_t seq_len = 8;
};

struct ExperimentConfig {
    std::string name = "run";
    DistanceKind distance = DistanceKind::SphereNegInner;
    int64_t n = 64;
    int64_t m = 1;

    EncoderChoice encoder = EncoderChoice::Mlp;
    std::vector<int64_t> mlp_hidden = {128};
    int64_t embed_dim = 128;  // encoder output width d ahead of the head (MLP path)
    TransformerSettings transformer;
    bool head_per_token = true;  // multi-token heads: per-token vs shared projection

    double t0 = 0.0;
    bool learnable_temperature = true;
    double tau_max = -1.0;  // < 0 means the (multi_token, m) default

    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-8;
    double weight_decay = 0.02;
    int64_t warmup_steps = 200;
    double clip_norm = 1.0;

    int64_t batch_size = 64;
    int64_t steps = 1000;
    int64_t eval_every = 100;
    int64_t eval_size = 256;

    GeneratorConfig data;
    uint64_t seed = 0;

    bool multi_token() const { return encoder == EncoderChoice::Transformer && m > 1; }
    double effective_tau_max() const;
    void validate() const;
};

ExperimentConfig experiment_config_from_json_text(const std::string& text);
ExperimentConfig load_experiment_config_json(const std::string& path);
std::string experiment_config_to_json_text(const ExperimentConfig& config);

struct TrainLogRow {
    int64_t step = 0;
    double loss = 0.0;
    double t = 0.0;
    double tau = 0.0;
    double pos_dist = 0.0;
    double neg_dist = 0.0;
    // NaN marks "no eval at this step"; the CSV cell is left empty.
    double recall1_i2t = 0.0;
    double recall1_t2i = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
};

void save_train_log_csv(const std::string& path, const TrainLog& log);
TrainLog load_train_log_csv(const std::string& path);

struct TrainResult {
    TrainLog log;
    std::vector<std::pair<std::string, Tensor>> checkpoint;  // params plus "t"
    Tensor eval_image_emb;  // final embeddings of the held-out eval batch
    Tensor eval_text_emb;
    RecallResult final_recall;
    double final_t = 0.0;
    double final_tau = 0.0;
};

/// Full two-tower run: encode -> head -> distance -> loss, AdamW with linear
/// warmup + cosine decay and global-norm clipping. Deterministic per config.
/// Throws NumericError naming the offending step if the loss goes non-finite.
TrainResult train(const ExperimentConfig& config);

/// First logged step after which tau stays within `threshold` relative spread
/// over `window` consecutive rows; nullopt if no such window exists.
std::optional<int64_t> convergence_step(const TrainLog& log, int64_t window,
                                        double threshold = 0.02);

struct GridRow {
    std::string name;
    bool failed = false;
    std::string error;
    double recall1_i2t = 0.0;
    double recall1_t2i = 0.0;
    double final_tau = 0.0;
    std::optional<int64_t> convergence;  // window = one synthetic epoch
    double pos_dist = 0.0;
    double neg_dist = 0.0;
};

/// Runs each config in order; per-cell failures are recorded and do not stop
/// the sweep.
std::vector<GridRow> run_grid(const std::vector<ExperimentConfig>& configs);

std::string grid_to_csv(const std::vector<GridRow>& rows);
std::vector<GridRow> grid_from_csv(const std::string& text);

}  // namespace obcl
