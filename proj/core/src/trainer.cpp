#include "obcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "obcl/encoder.hpp"
#include "obcl/errors.hpp"
#include "obcl/rng.hpp"

namespace obcl {

namespace {

uint64_t sub_seed(uint64_t seed, std::string_view name) {
    return splitmix64(seed ^ fnv1a(name));
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double ExperimentConfig::effective_tau_max() const {
    if (tau_max >= 0.0) return tau_max;
    return TemperatureParam::default_tau_max(multi_token(), m);
}

void ExperimentConfig::validate() const {
    if (n < 1 || m < 1) throw ConfigError("experiment: n, m must be >= 1");
    if (batch_size < 2) throw ConfigError("experiment: batch_size must be >= 2");
    if (steps < 0) throw ConfigError("experiment: steps must be >= 0");
    if (eval_every < 1) throw ConfigError("experiment: eval_every must be >= 1");
    if (eval_size < 2) throw ConfigError("experiment: eval_size must be >= 2");
    if (lr <= 0.0) throw ConfigError("experiment: lr must be > 0");
    if (clip_norm <= 0.0) throw ConfigError("experiment: clip_norm must be > 0");
    if (warmup_steps < 0) throw ConfigError("experiment: warmup_steps must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("experiment: weight_decay must be >= 0");
    if (encoder == EncoderChoice::Mlp) {
        if (embed_dim < 1) throw ConfigError("experiment: embed_dim must be >= 1");
    } else {
        const TransformerSettings& tf = transformer;
        if (tf.layers < 1 || tf.heads < 1 || tf.model_dim < 1 || tf.ff_dim < 1 || tf.seq_len < 1)
            throw ConfigError("experiment: transformer dims must be >= 1");
        if (tf.model_dim % tf.heads != 0)
            throw ConfigError("experiment: model_dim must divide evenly over heads");
        if (data.image_feature_dim % tf.seq_len != 0 || data.text_feature_dim % tf.seq_len != 0)
            throw ConfigError("experiment: feature dims must be divisible by seq_len");
    }
}

// ---------------------------------------------------------------------------
// config JSON

namespace {

void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == it.key();
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

TransformerSettings transformer_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"layers", "heads", "model_dim", "ff_dim", "seq_len"},
                   "experiment config (transformer)");
    TransformerSettings t;
    t.layers = j.value("layers", t.layers);
    t.heads = j.value("heads", t.heads);
    t.model_dim = j.value("model_dim", t.model_dim);
    t.ff_dim = j.value("ff_dim", t.ff_dim);
    t.seq_len = j.value("seq_len", t.seq_len);
    return t;
}

}  // namespace

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment config: invalid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"name",       "distance",     "n",          "m",
                    "encoder",    "mlp_hidden",   "embed_dim",  "transformer",
                    "head_per_token", "t0",       "learnable_temperature", "tau_max",
                    "lr",         "beta1",        "beta2",      "adam_eps",
                    "weight_decay", "warmup_steps", "clip_norm", "batch_size",
                    "steps",      "eval_every",   "eval_size",  "data",
                    "seed"},
                   "experiment config");
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    if (j.contains("distance")) c.distance = distance_kind_from_string(j["distance"]);
    c.n = j.value("n", c.n);
    c.m = j.value("m", c.m);
    if (j.contains("encoder")) {
        std::string e = j["encoder"];
        if (e == "mlp") c.encoder = EncoderChoice::Mlp;
        else if (e == "transformer") c.encoder = EncoderChoice::Transformer;
        else throw ConfigError("experiment config: unknown encoder '" + e + "'");
    }
    if (j.contains("mlp_hidden")) c.mlp_hidden = j["mlp_hidden"].get<std::vector<int64_t>>();
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    if (j.contains("transformer")) c.transformer = transformer_from_json(j["transformer"]);
    c.head_per_token = j.value("head_per_token", c.head_per_token);
    c.t0 = j.value("t0", c.t0);
    c.learnable_temperature = j.value("learnable_temperature", c.learnable_temperature);
    c.tau_max = j.value("tau_max", c.tau_max);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.eval_size = j.value("eval_size", c.eval_size);
    if (j.contains("data")) c.data = generator_config_from_json_text(j["data"].dump());
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("experiment config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return experiment_config_from_json_text(ss.str());
}

std::string experiment_config_to_json_text(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["distance"] = to_string(c.distance);
    j["n"] = c.n;
    j["m"] = c.m;
    j["encoder"] = c.encoder == EncoderChoice::Mlp ? "mlp" : "transformer";
    j["mlp_hidden"] = c.mlp_hidden;
    j["embed_dim"] = c.embed_dim;
    j["transformer"] = {{"layers", c.transformer.layers},
                        {"heads", c.transformer.heads},
                        {"model_dim", c.transformer.model_dim},
                        {"ff_dim", c.transformer.ff_dim},
                        {"seq_len", c.transformer.seq_len}};
    j["head_per_token"] = c.head_per_token;
    j["t0"] = c.t0;
    j["learnable_temperature"] = c.learnable_temperature;
    j["tau_max"] = c.tau_max;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["weight_decay"] = c.weight_decay;
    j["warmup_steps"] = c.warmup_steps;
    j["clip_norm"] = c.clip_norm;
    j["batch_size"] = c.batch_size;
    j["steps"] = c.steps;
    j["eval_every"] = c.eval_every;
    j["eval_size"] = c.eval_size;
    j["data"] = nlohmann::json::parse(generator_config_to_json_text(c.data));
    j["seed"] = c.seed;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// model assembly

namespace {

EmbedNorm norm_for(DistanceKind k) {
    switch (k) {
        case DistanceKind::SphereNegInner: return EmbedNorm::Row;
        case DistanceKind::EuclideanL2: return EmbedNorm::None;
        case DistanceKind::ObliqueGeodesic:
        case DistanceKind::ObliqueNegTrace: return EmbedNorm::Groups;
    }
    throw Error("norm_for: unknown kind");
}

struct Tower {
    std::optional<MLPEncoder> mlp;
    std::optional<MiniTransformer> tf;
    std::optional<ProjectionHead> head;
    size_t enc_offset = 0, enc_count = 0;
    size_t head_offset = 0, head_count = 0;

    // embeddings (b, n*m) for one batch side; leaves span the combined set
    Var forward(Graph& g, const std::vector<Var>& leaves, const Tensor& x) const {
        std::vector<Var> enc_leaves(leaves.begin() + static_cast<long>(enc_offset),
                                    leaves.begin() + static_cast<long>(enc_offset + enc_count));
        std::vector<Var> head_leaves(leaves.begin() + static_cast<long>(head_offset),
                                     leaves.begin() + static_cast<long>(head_offset + head_count));
        if (mlp) {
            Var in = g.leaf(x);
            Var states = mlp->forward(g, enc_leaves, in);
            return head->forward_single(g, head_leaves, states);
        }
        Var in = g.leaf(x);
        std::vector<Var> rows;
        int64_t b = x.shape[0], d = x.shape[1];
        rows.reserve(static_cast<size_t>(b));
        for (int64_t i = 0; i < b; ++i) {
            Var feats = g.slice(in, i, i + 1, 0, d);
            Var states = tf->forward_sample(g, enc_leaves, feats);
            rows.push_back(head->forward_multi(g, head_leaves, states));
        }
        return rows.size() == 1 ? rows[0] : g.concat(rows, 0);
    }
};

struct Model {
    Tower img, txt;
    ParamSet params;  // concatenated "img."/"txt." prefixed entries

    explicit Model(const ExperimentConfig& c) {
        build_tower(c, img, true);
        build_tower(c, txt, false);
    }

    void build_tower(const ExperimentConfig& c, Tower& tw, bool image) {
        const char* side = image ? "img" : "txt";
        int64_t feat = image ? c.data.image_feature_dim : c.data.text_feature_dim;
        int64_t head_in;
        tw.enc_offset = params.size();
        if (c.encoder == EncoderChoice::Mlp) {
            MLPEncoderConfig ec;
            ec.input_dim = feat;
            ec.hidden_dims = c.mlp_hidden;
            ec.output_dim = c.embed_dim;
            ec.seed = sub_seed(c.seed, std::string(side) + "_encoder");
            tw.mlp.emplace(ec);
            absorb(tw.mlp->params(), side);
            head_in = c.embed_dim;
        } else {
            MiniTransformerConfig tc;
            tc.layers = c.transformer.layers;
            tc.heads = c.transformer.heads;
            tc.model_dim = c.transformer.model_dim;
            tc.ff_dim = c.transformer.ff_dim;
            tc.seq_len = c.transformer.seq_len;
            tc.cls_count = c.m;
            tc.modality = image ? Modality::Visual : Modality::Textual;
            tc.input_dim = feat;
            tc.seed = sub_seed(c.seed, std::string(side) + "_encoder");
            tw.tf.emplace(tc);
            absorb(tw.tf->params(), side);
            head_in = c.transformer.model_dim;
        }
        tw.enc_count = params.size() - tw.enc_offset;

        HeadConfig hc;
        hc.in_dim = head_in;
        hc.n = c.n;
        hc.m = c.m;
        hc.norm = norm_for(c.distance);
        hc.multi_token = c.multi_token();
        hc.per_token = c.head_per_token;
        hc.seed = sub_seed(c.seed, std::string(side) + "_head");
        tw.head_offset = params.size();
        tw.head.emplace(hc);
        absorb(tw.head->params(), side);
        tw.head_count = params.size() - tw.head_offset;
    }

    void absorb(const ParamSet& src, const char* prefix) {
        for (size_t i = 0; i < src.size(); ++i)
            params.add(std::string(prefix) + "." + src.names[i], src.values[i]);
    }
};

struct EvalPoint {
    Tensor img_emb, txt_emb;
    RecallResult recall;
};

EvalPoint evaluate(const Model& model, const ExperimentConfig& c, const PairBatch& eval_batch) {
    Graph g;
    std::vector<Var> leaves = make_leaves(g, model.params);
    Var ei = model.img.forward(g, leaves, eval_batch.image);
    Var et = model.txt.forward(g, leaves, eval_batch.text);
    EvalPoint p;
    p.img_emb = g.value(ei);
    p.txt_emb = g.value(et);
    p.recall = recall_at_k(p.img_emb, p.txt_emb, c.distance, c.n, c.m, 1);
    return p;
}

double lr_at(const ExperimentConfig& c, int64_t step) {
    if (step < c.warmup_steps)
        return c.lr * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
    int64_t span = c.steps - c.warmup_steps;
    if (span <= 0) return c.lr;
    double frac = static_cast<double>(step - c.warmup_steps) / static_cast<double>(span);
    return c.lr * 0.5 * (1.0 + std::cos(frac * 3.14159265358979323846));
}

}  // namespace

// ---------------------------------------------------------------------------
// training loop

TrainResult train(const ExperimentConfig& config) {
    config.validate();
    Model model(config);
    double t = config.t0;
    const double tau_cap = config.effective_tau_max();

    // Adam state, one slot per parameter plus the trailing temperature slot.
    size_t np = model.params.size();
    std::vector<Tensor> m1(np), m2(np);
    for (size_t i = 0; i < np; ++i) {
        m1[i] = Tensor::zeros(model.params.values[i].shape);
        m2[i] = Tensor::zeros(model.params.values[i].shape);
    }
    double t_m1 = 0.0, t_m2 = 0.0;

    PairBatch eval_batch = generate(config.data, config.eval_size, 0);

    TrainResult out;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::optional<EvalPoint> last_eval;

    for (int64_t step = 0; step < config.steps; ++step) {
        PairBatch batch = generate(config.data, config.batch_size,
                                   static_cast<uint64_t>(step) + 1);
        Graph g;
        std::vector<Var> leaves = make_leaves(g, model.params);
        Var t_var = config.learnable_temperature ? g.leaf(Tensor::scalar(t)) : Var{};

        Var ei = model.img.forward(g, leaves, batch.image);
        Var et = model.txt.forward(g, leaves, batch.text);
        Var negd = distance_matrix(g, config.distance, ei, et, config.n, config.m);

        TemperatureParam temp;
        temp.t = t;
        temp.tau_max = tau_cap;
        temp.learnable = config.learnable_temperature;
        Var loss = contrastive_loss_graph(g, negd, t_var, temp);

        double loss_v = g.value(loss).data[0];
        if (!std::isfinite(loss_v))
            throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                               " (t=" + std::to_string(t) + ", run '" + config.name + "')");
        g.backward(loss);

        // logged distances are positive: negate the similarity matrix
        const Tensor& nd = g.value(negd);
        int64_t b = nd.shape[0];
        double pos = 0.0, negsum = 0.0;
        for (int64_t i = 0; i < b; ++i)
            for (int64_t j = 0; j < b; ++j)
                (i == j ? pos : negsum) += -nd.at(i, j);
        pos /= static_cast<double>(b);
        negsum /= static_cast<double>(b * (b - 1));

        std::vector<Tensor> grads(np);
        double sq = 0.0;
        for (size_t i = 0; i < np; ++i) {
            if (g.has_grad(leaves[i])) grads[i] = g.grad(leaves[i]);
            else grads[i] = Tensor::zeros(model.params.values[i].shape);
            for (double v : grads[i].data) sq += v * v;
        }
        double t_grad = 0.0;
        if (config.learnable_temperature && g.has_grad(t_var)) {
            t_grad = g.grad(t_var).data[0];
            sq += t_grad * t_grad;
        }
        double gnorm = std::sqrt(sq);
        if (!std::isfinite(gnorm))
            throw NumericError("train: non-finite gradient at step " + std::to_string(step) +
                               " (run '" + config.name + "')");
        double scale = gnorm > config.clip_norm ? config.clip_norm / gnorm : 1.0;

        double lr = lr_at(config, step);
        double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step + 1));
        double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step + 1));
        for (size_t i = 0; i < np; ++i) {
            Tensor& p = model.params.values[i];
            // decoupled decay on weight matrices only: gains, biases and the
            // temperature stay undecayed
            bool decay = p.rank() == 2 && config.weight_decay > 0.0;
            for (size_t e = 0; e < p.data.size(); ++e) {
                double gv = grads[i].data[e] * scale;
                m1[i].data[e] = config.beta1 * m1[i].data[e] + (1.0 - config.beta1) * gv;
                m2[i].data[e] = config.beta2 * m2[i].data[e] + (1.0 - config.beta2) * gv * gv;
                double update = (m1[i].data[e] / bc1) /
                                (std::sqrt(m2[i].data[e] / bc2) + config.adam_eps);
                if (decay) update += config.weight_decay * p.data[e];
                p.data[e] -= lr * update;
            }
        }
        if (config.learnable_temperature) {
            double gv = t_grad * scale;
            t_m1 = config.beta1 * t_m1 + (1.0 - config.beta1) * gv;
            t_m2 = config.beta2 * t_m2 + (1.0 - config.beta2) * gv * gv;
            t -= lr * (t_m1 / bc1) / (std::sqrt(t_m2 / bc2) + config.adam_eps);
        }

        TrainLogRow row;
        row.step = step;
        row.loss = loss_v;
        row.t = t;
        row.tau = std::min(std::exp(t), tau_cap);
        row.pos_dist = pos;
        row.neg_dist = negsum;
        row.recall1_i2t = nan;
        row.recall1_t2i = nan;
        if ((step + 1) % config.eval_every == 0 || step + 1 == config.steps) {
            last_eval = evaluate(model, config, eval_batch);
            row.recall1_i2t = last_eval->recall.i2t;
            row.recall1_t2i = last_eval->recall.t2i;
        }
        out.log.rows.push_back(row);
    }

    if (!last_eval) last_eval = evaluate(model, config, eval_batch);
    out.eval_image_emb = last_eval->img_emb;
    out.eval_text_emb = last_eval->txt_emb;
    out.final_recall = last_eval->recall;
    out.final_t = t;
    out.final_tau = std::min(std::exp(t), tau_cap);
    for (size_t i = 0; i < np; ++i)
        out.checkpoint.emplace_back(model.params.names[i], model.params.values[i]);
    out.checkpoint.emplace_back("t", Tensor::scalar(t));
    return out;
}

std::optional<int64_t> convergence_step(const TrainLog& log, int64_t window, double threshold) {
    if (log.rows.empty()) throw ConfigError("convergence_step: empty log");
    if (window < 1) throw ConfigError("convergence_step: window must be >= 1");
    auto n = static_cast<int64_t>(log.rows.size());
    for (int64_t i = 0; i + window <= n; ++i) {
        double lo = log.rows[static_cast<size_t>(i)].tau, hi = lo;
        for (int64_t j = i; j < i + window; ++j) {
            double v = log.rows[static_cast<size_t>(j)].tau;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        double ref = std::max(std::abs(log.rows[static_cast<size_t>(i)].tau), 1e-12);
        if ((hi - lo) / ref < threshold) return log.rows[static_cast<size_t>(i)].step;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// TrainLog CSV

void save_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream f(path);
    if (!f) throw Error("save_train_log_csv: cannot open " + path);
    f << "step,loss,t,tau,pos_dist,neg_dist,recall1_i2t,recall1_t2i\n";
    for (const auto& r : log.rows) {
        f << r.step << "," << fmt17(r.loss) << "," << fmt17(r.t) << "," << fmt17(r.tau) << ","
          << fmt17(r.pos_dist) << "," << fmt17(r.neg_dist) << ",";
        if (!std::isnan(r.recall1_i2t)) f << fmt17(r.recall1_i2t);
        f << ",";
        if (!std::isnan(r.recall1_t2i)) f << fmt17(r.recall1_t2i);
        f << "\n";
    }
    if (!f) throw Error("save_train_log_csv: write failure");
}

TrainLog load_train_log_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("load_train_log_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw Error("load_train_log_csv: empty file");
    if (line != "step,loss,t,tau,pos_dist,neg_dist,recall1_i2t,recall1_t2i")
        throw Error("load_train_log_csv: unexpected header");
    TrainLog log;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        TrainLogRow r;
        std::getline(ss, cell, ',');
        r.step = std::stoll(cell);
        std::getline(ss, cell, ',');
        r.loss = std::stod(cell);
        std::getline(ss, cell, ',');
        r.t = std::stod(cell);
        std::getline(ss, cell, ',');
        r.tau = std::stod(cell);
        std::getline(ss, cell, ',');
        r.pos_dist = std::stod(cell);
        std::getline(ss, cell, ',');
        r.neg_dist = std::stod(cell);
        std::getline(ss, cell, ',');
        r.recall1_i2t = cell.empty() ? nan : std::stod(cell);
        std::getline(ss, cell, ',');
        r.recall1_t2i = cell.empty() ? nan : std::stod(cell);
        log.rows.push_back(r);
    }
    return log;
}

// ---------------------------------------------------------------------------
// ablation grid

namespace {
// "one synthetic epoch" at desk scale; the stream has no natural epoch
constexpr int64_t kEpochSteps = 100;
}  // namespace

std::vector<GridRow> run_grid(const std::vector<ExperimentConfig>& configs) {
    if (configs.empty()) throw ConfigError("run_grid: need at least one config");
    std::vector<GridRow> rows;
    for (const auto& c : configs) {
        GridRow row;
        row.name = c.name;
        try {
            TrainResult r = train(c);
            row.recall1_i2t = r.final_recall.i2t;
            row.recall1_t2i = r.final_recall.t2i;
            row.final_tau = r.final_tau;
            if (!r.log.rows.empty() &&
                static_cast<int64_t>(r.log.rows.size()) >= kEpochSteps)
                row.convergence = convergence_step(r.log, kEpochSteps);
            if (!r.log.rows.empty()) {
                row.pos_dist = r.log.rows.back().pos_dist;
                row.neg_dist = r.log.rows.back().neg_dist;
            }
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            for (char& ch : row.error)
                if (ch == ',' || ch == '\n') ch = ';';
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string grid_to_csv(const std::vector<GridRow>& rows) {
    std::ostringstream os;
    os << "name,failed,error,recall1_i2t,recall1_t2i,final_tau,convergence_step,pos_dist,"
          "neg_dist\n";
    for (const auto& r : rows) {
        os << r.name << "," << (r.failed ? 1 : 0) << "," << r.error << ","
           << fmt17(r.recall1_i2t) << "," << fmt17(r.recall1_t2i) << "," << fmt17(r.final_tau)
           << ",";
        if (r.convergence) os << *r.convergence;
        os << "," << fmt17(r.pos_dist) << "," << fmt17(r.neg_dist) << "\n";
    }
    return os.str();
}

std::vector<GridRow> grid_from_csv(const std::string& text) {
    std::stringstream f(text);
    std::string line;
    if (!std::getline(f, line)) throw Error("grid_from_csv: empty input");
    std::vector<GridRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        GridRow r;
        std::getline(ss, r.name, ',');
        std::getline(ss, cell, ',');
        r.failed = cell == "1";
        std::getline(ss, r.error, ',');
        std::getline(ss, cell, ',');
        r.recall1_i2t = std::stod(cell);
        std::getline(ss, cell, ',');
        r.recall1_t2i = std::stod(cell);
        std::getline(ss, cell, ',');
        r.final_tau = std::stod(cell);
        std::getline(ss, cell, ',');
        if (!cell.empty()) r.convergence = std::stoll(cell);
        std::getline(ss, cell, ',');
        r.pos_dist = std::stod(cell);
        std::getline(ss, cell, ',');
        r.neg_dist = std::stod(cell);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace obcl
