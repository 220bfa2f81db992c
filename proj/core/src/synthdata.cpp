#include "obcl/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "obcl/errors.hpp"
#include "obcl/rng.hpp"

namespace obcl {

namespace {

void check_config(const GeneratorConfig& c) {
    if (c.num_classes < 2) throw ConfigError("generator: num_classes must be >= 2");
    if (c.latent_dim < 1 || c.image_feature_dim < 1 || c.text_feature_dim < 1)
        throw ConfigError("generator: dims must be >= 1");
    if (c.noise_std < 0.0) throw ConfigError("generator: noise_std must be >= 0");
    if (c.false_positive_rate < 0.0 || c.false_positive_rate >= 1.0)
        throw ConfigError("generator: false_positive_rate must be in [0, 1)");
}

Tensor gaussian_matrix(std::mt19937_64 rng, int64_t rows, int64_t cols, double std) {
    std::normal_distribution<double> dist(0.0, std);
    Tensor t = Tensor::zeros({rows, cols});
    for (double& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

PairBatch generate(const GeneratorConfig& config, int64_t count, uint64_t batch_index) {
    check_config(config);
    if (count < 1) throw ConfigError("generate: count must be >= 1");
    int64_t h = config.latent_dim;

    // Class latents and feature maps depend only on (seed, out_of_domain).
    const char* domain = config.out_of_domain ? "ood" : "ind";
    Tensor latents = gaussian_matrix(stream_rng(config.seed, "class_latents"), config.num_classes,
                                     h, 1.0);
    double map_std = 1.0 / std::sqrt(static_cast<double>(h));
    Tensor a_img = gaussian_matrix(stream_rng(config.seed, std::string("map_img_") + domain),
                                   config.image_feature_dim, h, map_std);
    Tensor a_txt = gaussian_matrix(stream_rng(config.seed, std::string("map_txt_") + domain),
                                   config.text_feature_dim, h, map_std);

    auto rng = stream_rng(config.seed, "batch", batch_index);
    std::uniform_int_distribution<int64_t> class_dist(0, config.num_classes - 1);
    std::uniform_int_distribution<int64_t> other_dist(0, config.num_classes - 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    PairBatch b;
    b.image = Tensor::zeros({count, config.image_feature_dim});
    b.text = Tensor::zeros({count, config.text_feature_dim});
    b.labels.resize(static_cast<size_t>(count));
    b.text_labels.resize(static_cast<size_t>(count));
    b.corrupted.assign(static_cast<size_t>(count), 0);

    std::vector<double> xi(static_cast<size_t>(h));
    auto emit = [&](Tensor& out, const Tensor& map, int64_t row, int64_t cls) {
        for (int64_t i = 0; i < map.shape[0]; ++i) {
            double s = 0.0;
            for (int64_t j = 0; j < h; ++j)
                s += map.at(i, j) *
                     (latents.at(cls, j) + config.noise_std * xi[static_cast<size_t>(j)]);
            out.at(row, i) = s;
        }
    };

    for (int64_t i = 0; i < count; ++i) {
        int64_t cls = class_dist(rng);
        // The pair shares one latent perturbation, so the exact partner stays
        // identifiable among same-class distractors.
        for (double& v : xi) v = noise(rng);
        b.labels[static_cast<size_t>(i)] = cls;
        emit(b.image, a_img, i, cls);

        int64_t text_cls = cls;
        bool corrupt = unit(rng) < config.false_positive_rate;
        if (corrupt) {
            int64_t other = other_dist(rng);
            text_cls = other >= cls ? other + 1 : other;
            b.corrupted[static_cast<size_t>(i)] = 1;
        }
        b.text_labels[static_cast<size_t>(i)] = text_cls;
        emit(b.text, a_txt, i, text_cls);
    }
    return b;
}

void save_pairbatch_csv(const std::string& path, const PairBatch& batch) {
    std::ofstream f(path);
    if (!f) throw Error("save_pairbatch_csv: cannot open " + path);
    int64_t di = batch.image.shape[1], dt = batch.text.shape[1];
    for (int64_t j = 0; j < di; ++j) f << "img_" << j << ",";
    for (int64_t j = 0; j < dt; ++j) f << "txt_" << j << ",";
    f << "label,text_label,corrupted\n";
    char buf[40];
    for (int64_t i = 0; i < batch.size(); ++i) {
        for (int64_t j = 0; j < di; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", batch.image.at(i, j));
            f << buf << ",";
        }
        for (int64_t j = 0; j < dt; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", batch.text.at(i, j));
            f << buf << ",";
        }
        f << batch.labels[static_cast<size_t>(i)] << "," << batch.text_labels[static_cast<size_t>(i)]
          << "," << static_cast<int>(batch.corrupted[static_cast<size_t>(i)]) << "\n";
    }
    if (!f) throw Error("save_pairbatch_csv: write failure");
}

PairBatch load_pairbatch_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("load_pairbatch_csv: cannot open " + path);
    std::string header;
    if (!std::getline(f, header)) throw Error("load_pairbatch_csv: empty file");
    int64_t di = 0, dt = 0;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ',')) {
            if (col.rfind("img_", 0) == 0) ++di;
            else if (col.rfind("txt_", 0) == 0) ++dt;
        }
    }
    if (di < 1 || dt < 1) throw Error("load_pairbatch_csv: bad header");

    std::vector<double> img, txt;
    PairBatch b;
    std::string line;
    int64_t rows = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int64_t j = 0; j < di; ++j) {
            std::getline(ss, cell, ',');
            img.push_back(std::stod(cell));
        }
        for (int64_t j = 0; j < dt; ++j) {
            std::getline(ss, cell, ',');
            txt.push_back(std::stod(cell));
        }
        std::getline(ss, cell, ',');
        b.labels.push_back(std::stoll(cell));
        std::getline(ss, cell, ',');
        b.text_labels.push_back(std::stoll(cell));
        std::getline(ss, cell, ',');
        b.corrupted.push_back(static_cast<uint8_t>(std::stoi(cell)));
        ++rows;
    }
    b.image = Tensor({rows, di}, std::move(img));
    b.text = Tensor({rows, dt}, std::move(txt));
    return b;
}

namespace {

GeneratorConfig config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "num_classes", "latent_dim",          "image_feature_dim", "text_feature_dim",
        "noise_std",   "false_positive_rate", "out_of_domain",     "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == it.key();
        if (!ok) throw ConfigError("generator config: unknown key '" + it.key() + "'");
    }
    GeneratorConfig c;
    c.num_classes = j.value("num_classes", c.num_classes);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.image_feature_dim = j.value("image_feature_dim", c.image_feature_dim);
    c.text_feature_dim = j.value("text_feature_dim", c.text_feature_dim);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.false_positive_rate = j.value("false_positive_rate", c.false_positive_rate);
    c.out_of_domain = j.value("out_of_domain", c.out_of_domain);
    c.seed = j.value("seed", c.seed);
    check_config(c);
    return c;
}

nlohmann::json config_to_json(const GeneratorConfig& c) {
    return {{"num_classes", c.num_classes},
            {"latent_dim", c.latent_dim},
            {"image_feature_dim", c.image_feature_dim},
            {"text_feature_dim", c.text_feature_dim},
            {"noise_std", c.noise_std},
            {"false_positive_rate", c.false_positive_rate},
            {"out_of_domain", c.out_of_domain},
            {"seed", c.seed}};
}

}  // namespace

void save_generator_config_json(const std::string& path, const GeneratorConfig& config) {
    std::ofstream f(path);
    if (!f) throw Error("save_generator_config_json: cannot open " + path);
    f << config_to_json(config).dump(2) << "\n";
}

GeneratorConfig load_generator_config_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("generator config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return generator_config_from_json_text(ss.str());
}

GeneratorConfig generator_config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("generator config: invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

std::string generator_config_to_json_text(const GeneratorConfig& config) {
    return config_to_json(config).dump(2);
}

}  // namespace obcl
