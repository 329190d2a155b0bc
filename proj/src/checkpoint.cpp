#include "sclab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace sclab::checkpoint {

namespace {

void put_u16(std::ostream& o, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    o.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& o, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    o.write(reinterpret_cast<const char*>(b), 4);
}

uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (in.gcount() != 2) throw BadCheckpoint("truncated checkpoint");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw BadCheckpoint("truncated checkpoint");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

// Little-endian float payloads. The build targets little-endian hosts; a
// byte-swap pass would go here for big-endian ones.
template <class T>
void put_tensor(std::ostream& o, const std::string& name, const Tensor<T>& t) {
    put_u16(o, static_cast<uint16_t>(name.size()));
    o.write(name.data(), static_cast<std::streamsize>(name.size()));
    o.put(static_cast<char>(sizeof(T)));
    o.put(static_cast<char>(t.ndim()));
    for (int d : t.shape) put_u32(o, static_cast<uint32_t>(d));
    o.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * static_cast<long>(sizeof(T))));
}

template <class T>
std::pair<std::string, Tensor<T>> get_tensor(std::istream& in) {
    uint16_t nlen = get_u16(in);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    if (in.gcount() != nlen) throw BadCheckpoint("truncated tensor name");
    int dtype = in.get();
    if (dtype != sizeof(T)) throw BadCheckpoint("scalar width mismatch in checkpoint");
    int ndim = in.get();
    if (ndim < 0 || ndim > 8) throw BadCheckpoint("bad tensor rank");
    std::vector<int> shape;
    for (int i = 0; i < ndim; ++i) shape.push_back(static_cast<int>(get_u32(in)));
    Tensor<T> t(shape);
    long bytes = t.numel() * static_cast<long>(sizeof(T));
    in.read(reinterpret_cast<char*>(t.data()), bytes);
    if (in.gcount() != bytes) throw BadCheckpoint("truncated tensor payload");
    return {std::move(name), std::move(t)};
}

std::map<std::string, std::string> parse_kv_block(const std::string& block) {
    std::map<std::string, std::string> kv;
    std::istringstream is(block);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::string model_config_block(const nn::ModelConfig& c) {
    std::ostringstream os;
    os << "type=classifier\n";
    os << "arch=" << nn::to_string(c.arch) << '\n';
    os << "height=" << c.height << "\nwidth=" << c.width << "\nchannels=" << c.channels << '\n';
    os << "num_classes=" << c.num_classes << '\n';
    os << "mlp_hidden=";
    for (size_t i = 0; i < c.mlp_hidden.size(); ++i) os << (i ? "," : "") << c.mlp_hidden[i];
    os << '\n';
    os << "cnn_channels=";
    for (size_t i = 0; i < c.cnn_channels.size(); ++i) os << (i ? "," : "") << c.cnn_channels[i];
    os << '\n';
    os << "cnn_dense=" << c.cnn_dense << '\n';
    os << "patch=" << c.patch << "\nembed=" << c.embed << "\ndepth=" << c.depth
       << "\nheads=" << c.heads << "\nmlp_ratio=" << c.mlp_ratio << '\n';
    os << "seed=" << c.seed << '\n';
    return os.str();
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(std::stoi(cur));
    return out;
}

nn::ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv) {
    nn::ModelConfig c;
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw BadCheckpoint("checkpoint config missing '" + k + "'");
        return it->second;
    };
    c.arch = nn::arch_from_string(get("arch"));
    c.height = std::stoi(get("height"));
    c.width = std::stoi(get("width"));
    c.channels = std::stoi(get("channels"));
    c.num_classes = std::stoi(get("num_classes"));
    c.mlp_hidden = parse_int_list(get("mlp_hidden"));
    c.cnn_channels = parse_int_list(get("cnn_channels"));
    c.cnn_dense = std::stoi(get("cnn_dense"));
    c.patch = std::stoi(get("patch"));
    c.embed = std::stoi(get("embed"));
    c.depth = std::stoi(get("depth"));
    c.heads = std::stoi(get("heads"));
    c.mlp_ratio = std::stoi(get("mlp_ratio"));
    c.seed = std::stoull(get("seed"));
    return c;
}

std::string generator_config_block(const invert::Generator<float>& g) {
    std::ostringstream os;
    const auto& c = g.config;
    os << "type=generator\n";
    os << "latent_dim=" << c.latent_dim << "\nclass_embed=" << c.class_embed << '\n';
    os << "base_channels=" << c.base_channels << "\nmid_channels=" << c.mid_channels << '\n';
    os << "steps=" << c.steps << "\nbatch=" << c.batch << '\n';
    os << "learning_rate=" << c.learning_rate << '\n';
    os << "lambda_cls=" << c.lambda_cls << "\nlambda_tv=" << c.lambda_tv
       << "\nlambda_l2=" << c.lambda_l2 << "\nlambda_div=" << c.lambda_div << '\n';
    os << "seed=" << c.seed << '\n';
    os << "height=" << g.height << "\nwidth=" << g.width << "\nchannels=" << g.channels
       << "\nnum_classes=" << g.num_classes << '\n';
    return os.str();
}

template <class T>
void save_params(std::ostream& o, const std::string& config_block,
                 const std::vector<nn::NamedTensor<T>>& params) {
    o.put(static_cast<char>(kVersion));
    put_u32(o, static_cast<uint32_t>(config_block.size()));
    o.write(config_block.data(), static_cast<std::streamsize>(config_block.size()));
    put_u32(o, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) put_tensor(o, p.name, p.value);
}

std::map<std::string, std::string> read_header(std::istream& in) {
    int version = in.get();
    if (version != kVersion) throw BadCheckpoint("unsupported checkpoint version");
    uint32_t clen = get_u32(in);
    std::string block(clen, '\0');
    in.read(block.data(), clen);
    if (in.gcount() != static_cast<std::streamsize>(clen))
        throw BadCheckpoint("truncated config block");
    return parse_kv_block(block);
}

template <class T>
std::vector<nn::NamedTensor<T>> read_params(std::istream& in) {
    uint32_t count = get_u32(in);
    std::vector<nn::NamedTensor<T>> params;
    params.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        auto [name, t] = get_tensor<T>(in);
        params.push_back({std::move(name), std::move(t)});
    }
    return params;
}

}  // namespace

void save_model(const nn::TrainedModel<float>& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    save_params(f, model_config_block(model.config), model.params);
}

void save_model(const nn::TrainedModel<double>& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    save_params(f, model_config_block(model.config), model.params);
}

nn::TrainedModel<float> load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw BadCheckpoint("cannot open " + path);
    auto kv = read_header(f);
    auto it = kv.find("type");
    if (it == kv.end() || it->second != "classifier")
        throw BadCheckpoint(path + " is not a classifier checkpoint");
    nn::TrainedModel<float> m;
    m.config = model_config_from_kv(kv);
    m.params = read_params<float>(f);
    nn::TrainedModel<float> fresh = nn::build<float>(m.config);
    if (fresh.params.size() != m.params.size()) throw BadCheckpoint("parameter list mismatch");
    for (size_t i = 0; i < m.params.size(); ++i)
        if (fresh.params[i].name != m.params[i].name ||
            fresh.params[i].value.shape != m.params[i].value.shape)
            throw BadCheckpoint("parameter " + m.params[i].name + " does not match architecture");
    return m;
}

void save_generator(const invert::Generator<float>& gen, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    save_params(f, generator_config_block(gen), gen.params);
}

invert::Generator<float> load_generator(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw BadCheckpoint("cannot open " + path);
    auto kv = read_header(f);
    auto it = kv.find("type");
    if (it == kv.end() || it->second != "generator")
        throw BadCheckpoint(path + " is not a generator checkpoint");
    auto get = [&](const std::string& k) -> const std::string& {
        auto i = kv.find(k);
        if (i == kv.end()) throw BadCheckpoint("generator checkpoint missing '" + k + "'");
        return i->second;
    };
    invert::Generator<float> g;
    g.config.latent_dim = std::stoi(get("latent_dim"));
    g.config.class_embed = std::stoi(get("class_embed"));
    g.config.base_channels = std::stoi(get("base_channels"));
    g.config.mid_channels = std::stoi(get("mid_channels"));
    g.config.steps = std::stoi(get("steps"));
    g.config.batch = std::stoi(get("batch"));
    g.config.learning_rate = std::stod(get("learning_rate"));
    g.config.lambda_cls = std::stod(get("lambda_cls"));
    g.config.lambda_tv = std::stod(get("lambda_tv"));
    g.config.lambda_l2 = std::stod(get("lambda_l2"));
    g.config.lambda_div = std::stod(get("lambda_div"));
    g.config.seed = std::stoull(get("seed"));
    g.height = std::stoi(get("height"));
    g.width = std::stoi(get("width"));
    g.channels = std::stoi(get("channels"));
    g.num_classes = std::stoi(get("num_classes"));
    g.params = read_params<float>(f);
    return g;
}

}  // namespace sclab::checkpoint
