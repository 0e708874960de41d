#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pinnsearch::net {

enum class Activation { Tanh, Relu };

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);  // throws ParseError

inline constexpr int kMaxLayers = 5;
inline constexpr std::array<int, 6> kUnitsMenu = {0, 20, 30, 40, 50, 60};

struct LayerChoice {
    int units = 0;  // 0 means the layer is absent
    Activation act = Activation::Tanh;
};

/// Candidate encoder description: exactly kMaxLayers (units, activation)
/// choices. A zero-unit layer is skipped at build time; its activation is
/// retained but inert.
struct ArchSpec {
    std::array<LayerChoice, kMaxLayers> layers{};

    bool valid() const;

    /// "20,tanh,30,relu,0,tanh,40,relu,50,tanh"
    std::string encode() const;
    static ArchSpec parse(std::string_view text);  // throws ParseError
};

/// One realized affine layer. `linear` marks the final projection, which has
/// no activation.
struct Layer {
    Eigen::MatrixXd W;  // fan_in x fan_out
    Eigen::VectorXd b;  // fan_out
    Activation act = Activation::Tanh;
    bool linear = false;
};

/// Realized MLP: the non-zero layers of an ArchSpec followed by a mandatory
/// linear projection to the latent dimension.
struct MlpParams {
    std::vector<Layer> layers;
    int input_dim = 0;
    int latent_dim = 0;

    std::size_t scalar_count() const;
};

/// Builds an MLP for `arch`, skipping zero-unit layers. Weights are uniform
/// in +-sqrt(6/(fan_in+fan_out)), biases zero; deterministic per seed.
MlpParams build(const ArchSpec& arch, int input_dim, int latent_dim, std::uint64_t seed);

/// Number of trainable scalars of build()'s output, without building it.
std::size_t param_count(const ArchSpec& arch, int input_dim, int latent_dim);

struct ForwardCache {
    Eigen::MatrixXd input;              // N x input_dim
    std::vector<Eigen::MatrixXd> pre;   // per layer: N x fan_out, pre-activation
    std::vector<Eigen::MatrixXd> post;  // per layer: N x fan_out, post-activation
};

/// Batch forward pass: rows of X are samples. Fills `cache` for backward()
/// when given.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& X,
                        ForwardCache* cache = nullptr);

struct MlpGrads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;

    void init_like(const MlpParams& params);
};

/// Reverse-mode pass. `upstream` is d(loss)/d(output), one row per sample.
/// Accumulates parameter gradients into `grads` and returns d(loss)/dX.
/// relu'(0) is 0 by convention; tanh'(z) = 1 - tanh(z)^2.
Eigen::MatrixXd backward(const MlpParams& params, const ForwardCache& cache,
                         const Eigen::MatrixXd& upstream, MlpGrads& grads);

}  // namespace pinnsearch::net
