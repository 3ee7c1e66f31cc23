#include "pano/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pano {

namespace {

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    os << "version = " << version << "\n";
    os << "train_h = " << train_h << "\n";
    os << "train_w = " << train_w << "\n";
    os << "tokens_h = " << tokens_h << "\n";
    os << "tokens_w = " << tokens_w << "\n";
    os << "ch1 = " << ch1 << "\n";
    os << "ch2 = " << ch2 << "\n";
    os << "ch3 = " << ch3 << "\n";
    os << "codebook_entries = " << codebook_entries << "\n";
    os << "codebook_dim = " << codebook_dim << "\n";
    os << "tf_dim = " << tf_dim << "\n";
    os << "tf_heads = " << tf_heads << "\n";
    os << "tf_blocks = " << tf_blocks << "\n";
    os << "tf_context = " << tf_context << "\n";
    os << "temperature = " << fmt_double(temperature) << "\n";
    os << "top_k = " << top_k << "\n";
    os << "w_p = " << w_p << "\n";
    os << "lambda_gan = " << fmt_double(lambda_gan) << "\n";
    os << "lambda_l1 = " << fmt_double(lambda_l1) << "\n";
    os << "lambda_vq = " << fmt_double(lambda_vq) << "\n";
    os << "lambda_ws_perc = " << fmt_double(lambda_ws_perc) << "\n";
    os << "lambda_perc = " << fmt_double(lambda_perc) << "\n";
    os << "adaptive_gan = " << (adaptive_gan ? 1 : 0) << "\n";
    os << "lr = " << fmt_double(lr) << "\n";
    os << "beta1 = " << fmt_double(beta1) << "\n";
    os << "beta2 = " << fmt_double(beta2) << "\n";
    os << "adam_eps = " << fmt_double(adam_eps) << "\n";
    os << "vqgan_steps = " << vqgan_steps << "\n";
    os << "transformer_steps = " << transformer_steps << "\n";
    os << "adjust_steps = " << adjust_steps << "\n";
    os << "batch = " << batch << "\n";
    os << "dataset_size = " << dataset_size << "\n";
    os << "gray = " << fmt_double(gray) << "\n";
    os << "seed = " << seed << "\n";
    return os.str();
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: malformed line: " + line);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string k = trim(line.substr(0, eq));
        const std::string v = trim(line.substr(eq + 1));
        if (k.empty()) throw std::invalid_argument("config: empty key in line: " + line);
        kv[k] = v;
    }
    return kv;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig cfg;
    auto kv = parse_kv_text(text);
    auto geti = [&](const char* key, int& out) {
        auto it = kv.find(key);
        if (it != kv.end()) {
            out = std::stoi(it->second);
            kv.erase(it);
        }
    };
    auto getd = [&](const char* key, double& out) {
        auto it = kv.find(key);
        if (it != kv.end()) {
            out = std::stod(it->second);
            kv.erase(it);
        }
    };
    auto getb = [&](const char* key, bool& out) {
        auto it = kv.find(key);
        if (it != kv.end()) {
            out = std::stoi(it->second) != 0;
            kv.erase(it);
        }
    };
    auto getu = [&](const char* key, std::uint64_t& out) {
        auto it = kv.find(key);
        if (it != kv.end()) {
            out = std::stoull(it->second);
            kv.erase(it);
        }
    };
    geti("version", cfg.version);
    geti("train_h", cfg.train_h);
    geti("train_w", cfg.train_w);
    geti("tokens_h", cfg.tokens_h);
    geti("tokens_w", cfg.tokens_w);
    geti("ch1", cfg.ch1);
    geti("ch2", cfg.ch2);
    geti("ch3", cfg.ch3);
    geti("codebook_entries", cfg.codebook_entries);
    geti("codebook_dim", cfg.codebook_dim);
    geti("tf_dim", cfg.tf_dim);
    geti("tf_heads", cfg.tf_heads);
    geti("tf_blocks", cfg.tf_blocks);
    geti("tf_context", cfg.tf_context);
    getd("temperature", cfg.temperature);
    geti("top_k", cfg.top_k);
    geti("w_p", cfg.w_p);
    getd("lambda_gan", cfg.lambda_gan);
    getd("lambda_l1", cfg.lambda_l1);
    getd("lambda_vq", cfg.lambda_vq);
    getd("lambda_ws_perc", cfg.lambda_ws_perc);
    getd("lambda_perc", cfg.lambda_perc);
    getb("adaptive_gan", cfg.adaptive_gan);
    getd("lr", cfg.lr);
    getd("beta1", cfg.beta1);
    getd("beta2", cfg.beta2);
    getd("adam_eps", cfg.adam_eps);
    geti("vqgan_steps", cfg.vqgan_steps);
    geti("transformer_steps", cfg.transformer_steps);
    geti("adjust_steps", cfg.adjust_steps);
    geti("batch", cfg.batch);
    geti("dataset_size", cfg.dataset_size);
    getd("gray", cfg.gray);
    getu("seed", cfg.seed);
    if (!kv.empty())
        throw std::invalid_argument("config: unknown key '" + kv.begin()->first + "'");
    if (cfg.train_w != 2 * cfg.train_h)
        throw std::invalid_argument("config: train_w must equal 2*train_h");
    if (cfg.tokens_h * 8 != cfg.train_h || cfg.tokens_w * 8 != cfg.train_w)
        throw std::invalid_argument("config: token grid must be train resolution / 8");
    return cfg;
}

void save_config(const ModelConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("save_config: cannot open " + path);
    os << cfg.to_text();
}

ModelConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return ModelConfig::from_text(buf.str());
}

}  // namespace pano
