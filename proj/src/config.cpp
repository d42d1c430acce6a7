#include "pkt/config.hpp"

#include <fstream>
#include <sstream>

#include "pkt/errors.hpp"

namespace pkt::cfg {

const std::vector<KeySpec>& Config::registry() {
    static const std::vector<KeySpec> keys = {
        {"run.seed", "7", "master RNG seed for the whole experiment"},
        {"run.jobs", "1", "worker threads (1 = fully sequential)"},
        {"data.size", "64", "phantom image size in pixels (square)"},
        {"data.n_subjects", "64", "number of synthetic subjects"},
        {"data.n_coils", "4", "receiver coils per subject"},
        {"data.n_readout", "128", "samples per spoke (with 2x oversampling)"},
        {"data.n_spokes", "200", "acquired spokes per subject slice"},
        {"data.window", "100", "sliding window width in spokes (= 4*l_in)"},
        {"data.step", "50", "sliding window step in spokes"},
        {"data.l_in", "25", "input tokens per sequence (window/4)"},
        {"data.split", "48:8:8", "train:val:test subject counts"},
        {"model.d_model", "256", "token/embedding width (= 2*n_readout)"},
        {"model.n_stacks", "2", "encoder and decoder stack count"},
        {"model.n_heads", "4", "attention heads"},
        {"model.d_k", "64", "key dimension per head"},
        {"model.d_v", "64", "value dimension per head"},
        {"model.d_ff", "1024", "feed-forward width (4*d_model)"},
        {"model.dropout", "0.0", "dropout rate"},
        {"model.index_base", "10000", "positional encoding base"},
        {"optim.lr", "0.001", "Adam learning rate"},
        {"optim.beta1", "0.9", "Adam beta1"},
        {"optim.beta2", "0.98", "Adam beta2"},
        {"optim.eps", "1e-9", "Adam epsilon"},
        {"optim.epochs", "40", "max training epochs per block"},
        {"optim.batch", "4", "sequences per optimizer step"},
        {"optim.lr_patience", "5", "halve lr after this many stagnant evals"},
        {"optim.lr_factor", "0.5", "lr multiplier on plateau"},
        {"optim.stop_patience", "15", "early stop after this many stagnant evals"},
        {"optim.tf_noise", "0.08", "stddev of noise on teacher-forced decoder inputs"},
    };
    return keys;
}

Config::Config() {
    for (const auto& k : registry()) values_[k.key] = k.default_value;
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    it->second = value;
}

void Config::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string()
                                          : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string& v = get_str(key);
    try {
        std::size_t pos = 0;
        const std::int64_t n = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not an integer: " + v);
    }
}

double Config::get_real(const std::string& key) const {
    const std::string& v = get_str(key);
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not a number: " + v);
    }
}

const std::string& Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
}

std::string Config::resolved_text() const {
    std::ostringstream os;
    for (const auto& k : registry())
        os << k.key << " = " << values_.at(k.key) << "\n";
    return os.str();
}

void Config::write_resolved(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write resolved config: " + path);
    f << resolved_text();
}

}  // namespace pkt::cfg
