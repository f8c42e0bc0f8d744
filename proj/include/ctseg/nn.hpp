#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ctseg/tensor.hpp"

namespace ctseg {

// ---------------------------------------------------------------------------
// Parameters and initialization

struct ConvParams {
    int out_ch = 0, in_ch = 0, kz = 1, ky = 1, kx = 1;
    int dilation = 1;
    std::vector<float> weight;  // (out_ch, in_ch, kz, ky, kx)
    std::vector<float> bias;    // (out_ch)

    std::size_t weight_count() const {
        return static_cast<std::size_t>(out_ch) * in_ch * kz * ky * kx;
    }
};

struct LinearParams {
    int out_n = 0, in_n = 0;
    std::vector<float> weight;  // (out_n, in_n)
    std::vector<float> bias;    // (out_n)
};

class Rng;

// Seeded He-normal draw: N(0, sqrt(2/fan_in)) where fan_in is the product
// of every shape component after the first. Biases are zeroed separately.
std::vector<float> kaiming_init(const std::vector<int>& shape, std::uint64_t seed);

ConvParams make_conv(int out_ch, int in_ch, int k, Rng& rng, int dilation = 1);
LinearParams make_linear(int out_n, int in_n, Rng& rng);

// ---------------------------------------------------------------------------
// Primitives

// Direct 3D convolution, stride 1, zero same-padding (pad = dilation*(k-1)/2
// per axis), so spatial dims are preserved.
Tensor5 conv3d(const Tensor5& x, const ConvParams& p);

Tensor5 maxpool3d_2x(const Tensor5& x);

// Trilinear align-corners resampling to an arbitrary spatial size.
Tensor5 resize3d(const Tensor5& x, int out_d, int out_h, int out_w);
Tensor5 upsample3d_2x(const Tensor5& x);

// Normalizes each (batch, channel) slab to mean 0 / variance 1 (+epsilon).
Tensor5 instance_norm(const Tensor5& x, double epsilon = 1e-5);

Tensor5 relu(const Tensor5& x);
Tensor5 sigmoid(const Tensor5& x);

Tensor5 concat_channels(const Tensor5& a, const Tensor5& b);
Tensor5 add(const Tensor5& a, const Tensor5& b);

// ---------------------------------------------------------------------------
// Residual encoder block: five 3x3x3 conv + instance-norm + relu stages with
// a shortcut from the block input added before the final activation. The
// shortcut is the identity when channel widths match and a 1x1x1 projection
// otherwise.

struct RebParams {
    std::vector<ConvParams> convs;  // five stages
    std::optional<ConvParams> projection;
};

RebParams make_reb(int in_ch, int out_ch, Rng& rng);
Tensor5 reb_forward(const Tensor5& x, const RebParams& p);

// ---------------------------------------------------------------------------
// Attention variants

enum class AttentionKind { None, Se, Sk, Cbam, Gate, Polar, Danet };

const char* to_string(AttentionKind kind);
AttentionKind attention_kind_from_string(const std::string& s);
std::vector<AttentionKind> all_attention_kinds();

struct SeParams {
    LinearParams fc1, fc2;
};
struct SkParams {
    ConvParams branch_a, branch_b;  // 3x3x3 and dilated 3x3x3 (effective 5x5x5)
    LinearParams reduce, select_a, select_b;
};
struct CbamParams {
    LinearParams mlp1, mlp2;  // shared MLP for avg- and max-pooled vectors
    ConvParams spatial;       // 7x7x7, 2 -> 1 channels
};
struct GateParams {
    ConvParams gating;  // 3x3x3 self-gating signal
    ConvParams theta, phi, psi;
};
struct PolarParams {
    ConvParams ch_q, ch_v;  // channel branch: 1-channel query, C/2 value
    LinearParams ch_z;      // C/2 -> C gate logits
    ConvParams sp_q, sp_v;  // spatial branch
};
struct DanetParams {
    ConvParams pos_q, pos_k, pos_v;
    float gamma_pos = 0.5f;
    float gamma_ch = 0.5f;
};

using AttentionParams = std::variant<std::monostate, SeParams, SkParams, CbamParams, GateParams,
                                     PolarParams, DanetParams>;

AttentionParams make_attention(AttentionKind kind, int channels, Rng& rng);

// Numerical evidence collected during a forward pass: every softmax
// normalization total (should be 1) and every multiplicative coefficient
// (should sit strictly inside (0,1)), both recorded at double precision.
struct AttentionDiag {
    std::vector<double> softmax_sums;
    std::vector<double> gate_values;
};

Tensor5 attention_forward(const Tensor5& x, AttentionKind kind, const AttentionParams& params,
                          AttentionDiag* diag = nullptr);

// ---------------------------------------------------------------------------
// Full model: three residual encoder blocks with pooling, an attention +
// bottleneck pair on the deepest features joined by addition, three decoder
// stages with skip concatenation, a sigmoid head and optional
// deep-supervision heads on the intermediate decoder stages.

struct ModelConfig {
    int in_channels = 1;
    int base_channels = 8;
    int num_encoders = 3;
    AttentionKind attention = AttentionKind::Sk;
    bool ds_heads = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DecoderStage {
    ConvParams conv;
};

struct ModelParams {
    RebParams enc1, enc2, enc3, bottleneck;
    AttentionParams attention;
    DecoderStage dec1, dec2, dec3;
    ConvParams head;
    ConvParams aux1, aux2;  // deep-supervision heads (dec1, dec2)
};

ModelParams init_model_params(const ModelConfig& cfg);

struct ModelOutput {
    Tensor5 main;
    std::vector<Tensor5> aux;
};

ModelOutput model_forward(const Tensor5& x, const ModelConfig& cfg, const ModelParams& params,
                          AttentionDiag* diag = nullptr);

// ---------------------------------------------------------------------------
// Parameter serialization in the sidecar+blob container (`.ctparams.json`
// header listing named tensors plus a `.ctparams.raw` little-endian blob).

void write_model_params(const ModelParams& params, const ModelConfig& cfg,
                        const std::string& path);
std::pair<ModelParams, ModelConfig> read_model_params(const std::string& path);

// FNV-1a over the raw little-endian float bits; used to freeze forward
// outputs as regression fixtures.
std::uint64_t tensor_hash(const Tensor5& t);

}  // namespace ctseg
