#include "pinnsearch/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pinnsearch/errors.hpp"
#include "pinnsearch/rng.hpp"

namespace pinnsearch::net {

std::string_view to_string(Activation act) {
    return act == Activation::Tanh ? "tanh" : "relu";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw ParseError("unknown activation '" + std::string(name) + "'");
}

bool ArchSpec::valid() const {
    for (const auto& l : layers) {
        if (std::find(kUnitsMenu.begin(), kUnitsMenu.end(), l.units) == kUnitsMenu.end()) {
            return false;
        }
    }
    return true;
}

std::string ArchSpec::encode() const {
    std::ostringstream os;
    for (int i = 0; i < kMaxLayers; ++i) {
        if (i > 0) os << ',';
        os << layers[i].units << ',' << to_string(layers[i].act);
    }
    return os.str();
}

ArchSpec ArchSpec::parse(std::string_view text) {
    std::vector<std::string> tokens;
    std::string token;
    std::istringstream is{std::string(text)};
    while (std::getline(is, token, ',')) {
        // trim surrounding whitespace
        auto b = token.find_first_not_of(" \t");
        auto e = token.find_last_not_of(" \t");
        tokens.push_back(b == std::string::npos ? "" : token.substr(b, e - b + 1));
    }
    if (tokens.size() != 2 * kMaxLayers) {
        throw ParseError("architecture needs exactly " + std::to_string(2 * kMaxLayers) +
                         " comma-separated tokens, got " + std::to_string(tokens.size()));
    }
    ArchSpec arch;
    for (int i = 0; i < kMaxLayers; ++i) {
        const std::string& u = tokens[2 * i];
        char* end = nullptr;
        long units = std::strtol(u.c_str(), &end, 10);
        if (end == u.c_str() || *end != '\0') {
            throw ParseError("bad unit count '" + u + "'");
        }
        arch.layers[i].units = static_cast<int>(units);
        arch.layers[i].act = activation_from_string(tokens[2 * i + 1]);
    }
    if (!arch.valid()) {
        throw ParseError("unit counts must come from {0,20,30,40,50,60}");
    }
    return arch;
}

std::size_t MlpParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += static_cast<std::size_t>(l.W.size()) + static_cast<std::size_t>(l.b.size());
    }
    return n;
}

MlpParams build(const ArchSpec& arch, int input_dim, int latent_dim, std::uint64_t seed) {
    Rng rng(seed);
    MlpParams mlp;
    mlp.input_dim = input_dim;
    mlp.latent_dim = latent_dim;

    auto make_layer = [&rng](int fan_in, int fan_out, Activation act, bool linear) {
        Layer l;
        l.act = act;
        l.linear = linear;
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        l.W.resize(fan_in, fan_out);
        for (int r = 0; r < fan_in; ++r) {
            for (int c = 0; c < fan_out; ++c) l.W(r, c) = rng.uniform(-bound, bound);
        }
        l.b = Eigen::VectorXd::Zero(fan_out);
        return l;
    };

    int fan_in = input_dim;
    for (const auto& choice : arch.layers) {
        if (choice.units == 0) continue;
        mlp.layers.push_back(make_layer(fan_in, choice.units, choice.act, false));
        fan_in = choice.units;
    }
    mlp.layers.push_back(make_layer(fan_in, latent_dim, Activation::Tanh, /*linear=*/true));
    return mlp;
}

std::size_t param_count(const ArchSpec& arch, int input_dim, int latent_dim) {
    std::size_t n = 0;
    std::size_t fan_in = static_cast<std::size_t>(input_dim);
    for (const auto& choice : arch.layers) {
        if (choice.units == 0) continue;
        std::size_t u = static_cast<std::size_t>(choice.units);
        n += fan_in * u + u;
        fan_in = u;
    }
    n += fan_in * static_cast<std::size_t>(latent_dim) + static_cast<std::size_t>(latent_dim);
    return n;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& X, ForwardCache* cache) {
    if (cache) {
        cache->input = X;
        cache->pre.clear();
        cache->post.clear();
        cache->pre.reserve(params.layers.size());
        cache->post.reserve(params.layers.size());
    }
    Eigen::MatrixXd h = X;
    for (const auto& l : params.layers) {
        Eigen::MatrixXd z = (h * l.W).rowwise() + l.b.transpose();
        if (cache) cache->pre.push_back(z);
        if (l.linear) {
            h = std::move(z);
        } else if (l.act == Activation::Tanh) {
            h = z.array().tanh().matrix();
        } else {
            h = z.cwiseMax(0.0);
        }
        if (cache) cache->post.push_back(h);
    }
    return h;
}

void MlpGrads::init_like(const MlpParams& params) {
    dW.clear();
    db.clear();
    dW.reserve(params.layers.size());
    db.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        dW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
        db.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
}

Eigen::MatrixXd backward(const MlpParams& params, const ForwardCache& cache,
                         const Eigen::MatrixXd& upstream, MlpGrads& grads) {
    Eigen::MatrixXd delta = upstream;
    for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
        const Layer& l = params.layers[li];
        if (!l.linear) {
            if (l.act == Activation::Tanh) {
                // tanh'(z) = 1 - tanh(z)^2, with tanh(z) cached as post.
                delta = delta.cwiseProduct(
                    (1.0 - cache.post[li].array().square()).matrix());
            } else {
                delta = delta.cwiseProduct(
                    (cache.pre[li].array() > 0.0).cast<double>().matrix());
            }
        }
        const Eigen::MatrixXd& layer_in =
            (li == 0) ? cache.input : cache.post[static_cast<std::size_t>(li) - 1];
        grads.dW[li] += layer_in.transpose() * delta;
        grads.db[li] += delta.colwise().sum().transpose();
        if (li > 0) {
            delta = delta * l.W.transpose();
        } else {
            return delta * l.W.transpose();
        }
    }
    return Eigen::MatrixXd::Zero(upstream.rows(), params.input_dim);
}

}  // namespace pinnsearch::net
