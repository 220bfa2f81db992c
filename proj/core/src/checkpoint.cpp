#include "obcl/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "obcl/errors.hpp"

namespace obcl {

namespace {
constexpr const char* kMagic = "obcl-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, Tensor>>& entries) {
    os << kMagic << " v" << kVersion << "\n" << entries.size() << "\n";
    char buf[64];
    for (const auto& [name, t] : entries) {
        if (name.find_first_of(" \n\t") != std::string::npos)
            throw Error("save_checkpoint: name contains whitespace: " + name);
        os << name << " " << t.rank();
        for (int64_t d : t.shape) os << " " << d;
        os << "\n";
        for (size_t i = 0; i < t.data.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a", t.data[i]);
            os << (i ? " " : "") << buf;
        }
        os << "\n";
    }
    if (!os) throw Error("save_checkpoint: write failure");
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries) {
    std::ofstream f(path);
    if (!f) throw Error("save_checkpoint: cannot open " + path);
    save_checkpoint(f, entries);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(std::istream& is) {
    std::string magic, version;
    is >> magic >> version;
    if (magic != kMagic || version != "v1")
        throw Error("load_checkpoint: bad header (expected '" + std::string(kMagic) + " v1')");
    size_t count = 0;
    is >> count;
    std::vector<std::pair<std::string, Tensor>> entries;
    entries.reserve(count);
    for (size_t e = 0; e < count; ++e) {
        std::string name;
        int rank = 0;
        if (!(is >> name >> rank) || rank < 1 || rank > 2)
            throw Error("load_checkpoint: corrupt entry header");
        std::vector<int64_t> shape(static_cast<size_t>(rank));
        for (auto& d : shape)
            if (!(is >> d)) throw Error("load_checkpoint: corrupt shape for " + name);
        int64_t n = Tensor::numel(shape);
        std::vector<double> data(static_cast<size_t>(n));
        for (auto& v : data) {
            std::string tok;
            if (!(is >> tok)) throw Error("load_checkpoint: truncated data for " + name);
            char* end = nullptr;
            v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str()) throw Error("load_checkpoint: bad value in " + name);
        }
        entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return entries;
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("load_checkpoint: cannot open " + path);
    return load_checkpoint(f);
}

}  // namespace obcl
