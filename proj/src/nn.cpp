#include "ctseg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <utility>

#include "ctseg/rng.hpp"
#include "json.hpp"

namespace ctseg {
namespace {

double sigmoid_d(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Per-batch fully connected layer in double precision.
std::vector<double> linear_forward(const LinearParams& p, const std::vector<double>& in) {
    if (static_cast<int>(in.size()) != p.in_n)
        throw std::invalid_argument("linear layer input width mismatch");
    std::vector<double> out(p.out_n);
    for (int o = 0; o < p.out_n; ++o) {
        double acc = p.bias[o];
        const float* w = &p.weight[static_cast<std::size_t>(o) * p.in_n];
        for (int i = 0; i < p.in_n; ++i) acc += static_cast<double>(w[i]) * in[i];
        out[o] = acc;
    }
    return out;
}

std::vector<double> global_avg_pool(const Tensor5& x, int ib) {
    std::vector<double> out(x.c);
    const double inv = 1.0 / static_cast<double>(x.spatial());
    for (int c = 0; c < x.c; ++c) {
        double acc = 0.0;
        const float* p = &x.data[x.index(ib, c, 0, 0, 0)];
        for (std::size_t i = 0; i < x.spatial(); ++i) acc += p[i];
        out[c] = acc * inv;
    }
    return out;
}

std::vector<double> global_max_pool(const Tensor5& x, int ib) {
    std::vector<double> out(x.c);
    for (int c = 0; c < x.c; ++c) {
        const float* p = &x.data[x.index(ib, c, 0, 0, 0)];
        double best = p[0];
        for (std::size_t i = 1; i < x.spatial(); ++i) best = std::max(best, static_cast<double>(p[i]));
        out[c] = best;
    }
    return out;
}

// Stable softmax in place; returns the post-normalization total for diag.
double softmax_inplace(std::vector<double>& v) {
    double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& e : v) {
        e = std::exp(e - mx);
        sum += e;
    }
    double total = 0.0;
    for (double& e : v) {
        e /= sum;
        total += e;
    }
    return total;
}

void scale_channel(Tensor5& x, int ib, int c, double gain) {
    float* p = &x.data[x.index(ib, c, 0, 0, 0)];
    for (std::size_t i = 0; i < x.spatial(); ++i)
        p[i] = static_cast<float>(static_cast<double>(p[i]) * gain);
}

}  // namespace

// ---------------------------------------------------------------------------
// Initialization

std::vector<float> kaiming_init(const std::vector<int>& shape, std::uint64_t seed) {
    if (shape.empty()) throw std::invalid_argument("kaiming_init: empty shape");
    std::size_t count = 1;
    for (int s : shape) {
        if (s <= 0) throw std::invalid_argument("kaiming_init: non-positive shape component");
        count *= static_cast<std::size_t>(s);
    }
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= static_cast<std::size_t>(shape[i]);
    if (shape.size() < 2 || fan_in == 0) throw std::invalid_argument("kaiming_init: zero fan-in");

    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Rng rng(seed);
    std::vector<float> out(count);
    for (float& v : out) v = static_cast<float>(rng.next_gaussian() * std_dev);
    return out;
}

ConvParams make_conv(int out_ch, int in_ch, int k, Rng& rng, int dilation) {
    ConvParams p;
    p.out_ch = out_ch;
    p.in_ch = in_ch;
    p.kz = p.ky = p.kx = k;
    p.dilation = dilation;
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k * k));
    p.weight.resize(p.weight_count());
    for (float& v : p.weight) v = static_cast<float>(rng.next_gaussian() * std_dev);
    p.bias.assign(out_ch, 0.0f);
    return p;
}

LinearParams make_linear(int out_n, int in_n, Rng& rng) {
    LinearParams p;
    p.out_n = out_n;
    p.in_n = in_n;
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in_n));
    p.weight.resize(static_cast<std::size_t>(out_n) * in_n);
    for (float& v : p.weight) v = static_cast<float>(rng.next_gaussian() * std_dev);
    p.bias.assign(out_n, 0.0f);
    return p;
}

// ---------------------------------------------------------------------------
// Primitives

Tensor5 conv3d(const Tensor5& x, const ConvParams& p) {
    if (x.c != p.in_ch) throw std::invalid_argument("conv3d: input channel mismatch");
    if (p.weight.size() != p.weight_count() || static_cast<int>(p.bias.size()) != p.out_ch)
        throw std::invalid_argument("conv3d: uninitialized parameters");

    const int pz = p.dilation * (p.kz - 1) / 2;
    const int py = p.dilation * (p.ky - 1) / 2;
    const int px = p.dilation * (p.kx - 1) / 2;

    Tensor5 out(x.b, p.out_ch, x.d, x.h, x.w);
    for (int ib = 0; ib < x.b; ++ib) {
        for (int oc = 0; oc < p.out_ch; ++oc) {
            for (int z = 0; z < x.d; ++z) {
                for (int y = 0; y < x.h; ++y) {
                    for (int xx = 0; xx < x.w; ++xx) {
                        double acc = p.bias[oc];
                        for (int ic = 0; ic < p.in_ch; ++ic) {
                            const std::size_t wbase =
                                ((static_cast<std::size_t>(oc) * p.in_ch + ic) * p.kz) *
                                static_cast<std::size_t>(p.ky) * p.kx;
                            for (int kz = 0; kz < p.kz; ++kz) {
                                int sz = z - pz + kz * p.dilation;
                                if (sz < 0 || sz >= x.d) continue;
                                for (int ky = 0; ky < p.ky; ++ky) {
                                    int sy = y - py + ky * p.dilation;
                                    if (sy < 0 || sy >= x.h) continue;
                                    for (int kx = 0; kx < p.kx; ++kx) {
                                        int sx = xx - px + kx * p.dilation;
                                        if (sx < 0 || sx >= x.w) continue;
                                        acc += static_cast<double>(
                                                   p.weight[wbase + (static_cast<std::size_t>(kz) *
                                                                         p.ky +
                                                                     ky) *
                                                                        p.kx +
                                                            kx]) *
                                               x.at(ib, ic, sz, sy, sx);
                                    }
                                }
                            }
                        }
                        out.at(ib, oc, z, y, xx) = static_cast<float>(acc);
                    }
                }
            }
        }
    }
    return out;
}

Tensor5 maxpool3d_2x(const Tensor5& x) {
    if (x.d % 2 != 0 || x.h % 2 != 0 || x.w % 2 != 0)
        throw std::invalid_argument("maxpool3d: spatial dims must be even");
    Tensor5 out(x.b, x.c, x.d / 2, x.h / 2, x.w / 2);
    for (int ib = 0; ib < x.b; ++ib)
        for (int c = 0; c < x.c; ++c)
            for (int z = 0; z < out.d; ++z)
                for (int y = 0; y < out.h; ++y)
                    for (int xx = 0; xx < out.w; ++xx) {
                        float best = x.at(ib, c, 2 * z, 2 * y, 2 * xx);
                        for (int dz = 0; dz < 2; ++dz)
                            for (int dy = 0; dy < 2; ++dy)
                                for (int dx = 0; dx < 2; ++dx)
                                    best = std::max(best,
                                                    x.at(ib, c, 2 * z + dz, 2 * y + dy, 2 * xx + dx));
                        out.at(ib, c, z, y, xx) = best;
                    }
    return out;
}

Tensor5 resize3d(const Tensor5& x, int out_d, int out_h, int out_w) {
    if (out_d < 1 || out_h < 1 || out_w < 1)
        throw std::invalid_argument("resize3d: output dims must be positive");
    Tensor5 out(x.b, x.c, out_d, out_h, out_w);

    auto src = [](int i, int n_out, int n_in) {
        if (n_out == 1) return 0.0;
        return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
    };

    for (int ib = 0; ib < x.b; ++ib)
        for (int c = 0; c < x.c; ++c)
            for (int z = 0; z < out_d; ++z) {
                double sz = src(z, out_d, x.d);
                int z0 = static_cast<int>(sz), z1 = std::min(z0 + 1, x.d - 1);
                double fz = sz - z0;
                for (int y = 0; y < out_h; ++y) {
                    double sy = src(y, out_h, x.h);
                    int y0 = static_cast<int>(sy), y1 = std::min(y0 + 1, x.h - 1);
                    double fy = sy - y0;
                    for (int xx = 0; xx < out_w; ++xx) {
                        double sx = src(xx, out_w, x.w);
                        int x0 = static_cast<int>(sx), x1 = std::min(x0 + 1, x.w - 1);
                        double fx = sx - x0;
                        double c00 = (1 - fx) * x.at(ib, c, z0, y0, x0) + fx * x.at(ib, c, z0, y0, x1);
                        double c01 = (1 - fx) * x.at(ib, c, z0, y1, x0) + fx * x.at(ib, c, z0, y1, x1);
                        double c10 = (1 - fx) * x.at(ib, c, z1, y0, x0) + fx * x.at(ib, c, z1, y0, x1);
                        double c11 = (1 - fx) * x.at(ib, c, z1, y1, x0) + fx * x.at(ib, c, z1, y1, x1);
                        double c0 = (1 - fy) * c00 + fy * c01;
                        double c1 = (1 - fy) * c10 + fy * c11;
                        out.at(ib, c, z, y, xx) = static_cast<float>((1 - fz) * c0 + fz * c1);
                    }
                }
            }
    return out;
}

Tensor5 upsample3d_2x(const Tensor5& x) { return resize3d(x, 2 * x.d, 2 * x.h, 2 * x.w); }

Tensor5 instance_norm(const Tensor5& x, double epsilon) {
    Tensor5 out = x;
    for (int ib = 0; ib < x.b; ++ib)
        for (int c = 0; c < x.c; ++c) {
            const float* p = &x.data[x.index(ib, c, 0, 0, 0)];
            double mean = 0.0;
            for (std::size_t i = 0; i < x.spatial(); ++i) mean += p[i];
            mean /= static_cast<double>(x.spatial());
            double var = 0.0;
            for (std::size_t i = 0; i < x.spatial(); ++i) {
                double dlt = p[i] - mean;
                var += dlt * dlt;
            }
            var /= static_cast<double>(x.spatial());
            double inv = 1.0 / std::sqrt(var + epsilon);
            float* q = &out.data[out.index(ib, c, 0, 0, 0)];
            for (std::size_t i = 0; i < x.spatial(); ++i)
                q[i] = static_cast<float>((p[i] - mean) * inv);
        }
    return out;
}

Tensor5 relu(const Tensor5& x) {
    Tensor5 out = x;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor5 sigmoid(const Tensor5& x) {
    Tensor5 out = x;
    for (float& v : out.data) v = static_cast<float>(sigmoid_d(v));
    return out;
}

Tensor5 concat_channels(const Tensor5& a, const Tensor5& b) {
    if (a.b != b.b || a.d != b.d || a.h != b.h || a.w != b.w)
        throw std::invalid_argument("concat_channels: spatial/batch shape mismatch");
    Tensor5 out(a.b, a.c + b.c, a.d, a.h, a.w);
    for (int ib = 0; ib < a.b; ++ib) {
        for (int c = 0; c < a.c; ++c)
            std::copy_n(&a.data[a.index(ib, c, 0, 0, 0)], a.spatial(),
                        &out.data[out.index(ib, c, 0, 0, 0)]);
        for (int c = 0; c < b.c; ++c)
            std::copy_n(&b.data[b.index(ib, c, 0, 0, 0)], b.spatial(),
                        &out.data[out.index(ib, a.c + c, 0, 0, 0)]);
    }
    return out;
}

Tensor5 add(const Tensor5& a, const Tensor5& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Tensor5 out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

// ---------------------------------------------------------------------------
// Residual encoder block

RebParams make_reb(int in_ch, int out_ch, Rng& rng) {
    RebParams p;
    p.convs.push_back(make_conv(out_ch, in_ch, 3, rng));
    for (int i = 1; i < 5; ++i) p.convs.push_back(make_conv(out_ch, out_ch, 3, rng));
    if (in_ch != out_ch) p.projection = make_conv(out_ch, in_ch, 1, rng);
    return p;
}

Tensor5 reb_forward(const Tensor5& x, const RebParams& p) {
    if (p.convs.size() != 5) throw std::invalid_argument("reb_forward: expected five conv stages");
    Tensor5 y = x;
    for (std::size_t i = 0; i < p.convs.size(); ++i) {
        y = instance_norm(conv3d(y, p.convs[i]));
        if (i + 1 < p.convs.size()) y = relu(y);
    }
    Tensor5 shortcut = p.projection ? conv3d(x, *p.projection) : x;
    return relu(add(y, shortcut));
}

// ---------------------------------------------------------------------------
// Attention

const char* to_string(AttentionKind kind) {
    switch (kind) {
        case AttentionKind::None: return "none";
        case AttentionKind::Se: return "se";
        case AttentionKind::Sk: return "sk";
        case AttentionKind::Cbam: return "cbam";
        case AttentionKind::Gate: return "gate";
        case AttentionKind::Polar: return "polar";
        case AttentionKind::Danet: return "danet";
    }
    return "none";
}

AttentionKind attention_kind_from_string(const std::string& s) {
    for (AttentionKind k : all_attention_kinds())
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown attention variant: " + s +
                                " (expected none|se|sk|cbam|gate|polar|danet)");
}

std::vector<AttentionKind> all_attention_kinds() {
    return {AttentionKind::None, AttentionKind::Se,    AttentionKind::Sk,   AttentionKind::Cbam,
            AttentionKind::Gate, AttentionKind::Polar, AttentionKind::Danet};
}

AttentionParams make_attention(AttentionKind kind, int channels, Rng& rng) {
    const int reduced = std::max(1, channels / 2);
    switch (kind) {
        case AttentionKind::None:
            return std::monostate{};
        case AttentionKind::Se: {
            SeParams p;
            p.fc1 = make_linear(reduced, channels, rng);
            p.fc2 = make_linear(channels, reduced, rng);
            return p;
        }
        case AttentionKind::Sk: {
            SkParams p;
            p.branch_a = make_conv(channels, channels, 3, rng);
            p.branch_b = make_conv(channels, channels, 3, rng, /*dilation=*/2);
            p.reduce = make_linear(reduced, channels, rng);
            p.select_a = make_linear(channels, reduced, rng);
            p.select_b = make_linear(channels, reduced, rng);
            return p;
        }
        case AttentionKind::Cbam: {
            CbamParams p;
            p.mlp1 = make_linear(reduced, channels, rng);
            p.mlp2 = make_linear(channels, reduced, rng);
            p.spatial = make_conv(1, 2, 7, rng);
            return p;
        }
        case AttentionKind::Gate: {
            GateParams p;
            p.gating = make_conv(channels, channels, 3, rng);
            p.theta = make_conv(reduced, channels, 1, rng);
            p.phi = make_conv(reduced, channels, 1, rng);
            p.psi = make_conv(1, reduced, 1, rng);
            return p;
        }
        case AttentionKind::Polar: {
            PolarParams p;
            p.ch_q = make_conv(1, channels, 1, rng);
            p.ch_v = make_conv(reduced, channels, 1, rng);
            p.ch_z = make_linear(channels, reduced, rng);
            p.sp_q = make_conv(reduced, channels, 1, rng);
            p.sp_v = make_conv(reduced, channels, 1, rng);
            return p;
        }
        case AttentionKind::Danet: {
            DanetParams p;
            const int q = std::max(1, channels / 4);
            p.pos_q = make_conv(q, channels, 1, rng);
            p.pos_k = make_conv(q, channels, 1, rng);
            p.pos_v = make_conv(channels, channels, 1, rng);
            return p;
        }
    }
    throw std::invalid_argument("unknown attention variant");
}

namespace {

void record_gate(AttentionDiag* diag, double v) {
    if (diag) diag->gate_values.push_back(v);
}
void record_softmax(AttentionDiag* diag, double v) {
    if (diag) diag->softmax_sums.push_back(v);
}

Tensor5 se_forward(const Tensor5& x, const SeParams& p, AttentionDiag* diag) {
    Tensor5 out = x;
    for (int ib = 0; ib < x.b; ++ib) {
        std::vector<double> z = global_avg_pool(x, ib);
        std::vector<double> h1 = linear_forward(p.fc1, z);
        for (double& v : h1) v = std::max(0.0, v);
        std::vector<double> logits = linear_forward(p.fc2, h1);
        for (int c = 0; c < x.c; ++c) {
            double g = sigmoid_d(logits[c]);
            record_gate(diag, g);
            scale_channel(out, ib, c, g);
        }
    }
    return out;
}

Tensor5 sk_forward(const Tensor5& x, const SkParams& p, AttentionDiag* diag) {
    Tensor5 ua = relu(instance_norm(conv3d(x, p.branch_a)));
    Tensor5 ub = relu(instance_norm(conv3d(x, p.branch_b)));
    Tensor5 fused = add(ua, ub);

    Tensor5 out(x.b, x.c, x.d, x.h, x.w);
    for (int ib = 0; ib < x.b; ++ib) {
        std::vector<double> s = global_avg_pool(fused, ib);
        std::vector<double> z = linear_forward(p.reduce, s);
        for (double& v : z) v = std::max(0.0, v);
        std::vector<double> la = linear_forward(p.select_a, z);
        std::vector<double> lb = linear_forward(p.select_b, z);
        for (int c = 0; c < x.c; ++c) {
            std::vector<double> pair = {la[c], lb[c]};
            record_softmax(diag, softmax_inplace(pair));
            const float* pa = &ua.data[ua.index(ib, c, 0, 0, 0)];
            const float* pb = &ub.data[ub.index(ib, c, 0, 0, 0)];
            float* po = &out.data[out.index(ib, c, 0, 0, 0)];
            for (std::size_t i = 0; i < x.spatial(); ++i)
                po[i] = static_cast<float>(pair[0] * pa[i] + pair[1] * pb[i]);
        }
    }
    return out;
}

Tensor5 cbam_forward(const Tensor5& x, const CbamParams& p, AttentionDiag* diag) {
    Tensor5 gated = x;
    for (int ib = 0; ib < x.b; ++ib) {
        std::vector<double> avg = global_avg_pool(x, ib);
        std::vector<double> mx = global_max_pool(x, ib);
        auto mlp = [&](std::vector<double> v) {
            v = linear_forward(p.mlp1, v);
            for (double& e : v) e = std::max(0.0, e);
            return linear_forward(p.mlp2, v);
        };
        std::vector<double> la = mlp(avg);
        std::vector<double> lm = mlp(mx);
        for (int c = 0; c < x.c; ++c) {
            double g = sigmoid_d(la[c] + lm[c]);
            record_gate(diag, g);
            scale_channel(gated, ib, c, g);
        }
    }

    // Spatial gate from channel-mean and channel-max maps.
    Tensor5 pooled(x.b, 2, x.d, x.h, x.w);
    for (int ib = 0; ib < x.b; ++ib)
        for (std::size_t i = 0; i < x.spatial(); ++i) {
            double mean = 0.0;
            double mx = gated.data[gated.index(ib, 0, 0, 0, 0) + i];
            for (int c = 0; c < x.c; ++c) {
                double v = gated.data[gated.index(ib, c, 0, 0, 0) + i];
                mean += v;
                mx = std::max(mx, v);
            }
            pooled.data[pooled.index(ib, 0, 0, 0, 0) + i] =
                static_cast<float>(mean / static_cast<double>(x.c));
            pooled.data[pooled.index(ib, 1, 0, 0, 0) + i] = static_cast<float>(mx);
        }
    Tensor5 logits = conv3d(pooled, p.spatial);

    Tensor5 out = gated;
    for (int ib = 0; ib < x.b; ++ib)
        for (std::size_t i = 0; i < x.spatial(); ++i) {
            double g = sigmoid_d(logits.data[logits.index(ib, 0, 0, 0, 0) + i]);
            record_gate(diag, g);
            for (int c = 0; c < x.c; ++c) {
                std::size_t idx = out.index(ib, c, 0, 0, 0) + i;
                out.data[idx] = static_cast<float>(static_cast<double>(out.data[idx]) * g);
            }
        }
    return out;
}

Tensor5 gate_forward(const Tensor5& x, const GateParams& p, AttentionDiag* diag) {
    // Additive attention with the gating signal derived from the same
    // features (the bottleneck has no separate decoder operand).
    Tensor5 g = relu(instance_norm(conv3d(x, p.gating)));
    Tensor5 t = conv3d(x, p.theta);
    Tensor5 f = conv3d(g, p.phi);
    Tensor5 q = relu(add(t, f));
    Tensor5 logits = conv3d(q, p.psi);

    Tensor5 out = x;
    for (int ib = 0; ib < x.b; ++ib)
        for (std::size_t i = 0; i < x.spatial(); ++i) {
            double a = sigmoid_d(logits.data[logits.index(ib, 0, 0, 0, 0) + i]);
            record_gate(diag, a);
            for (int c = 0; c < x.c; ++c) {
                std::size_t idx = out.index(ib, c, 0, 0, 0) + i;
                out.data[idx] = static_cast<float>(static_cast<double>(out.data[idx]) * a);
            }
        }
    return out;
}

Tensor5 polar_forward(const Tensor5& x, const PolarParams& p, AttentionDiag* diag) {
    const std::size_t n = x.spatial();

    // Channel branch: spatial softmax of a 1-channel query pools the value
    // map into one vector, which gates channels after a linear lift.
    Tensor5 q_map = conv3d(x, p.ch_q);
    Tensor5 v_map = conv3d(x, p.ch_v);
    Tensor5 x1 = x;
    for (int ib = 0; ib < x.b; ++ib) {
        std::vector<double> q(n);
        for (std::size_t i = 0; i < n; ++i) q[i] = q_map.data[q_map.index(ib, 0, 0, 0, 0) + i];
        record_softmax(diag, softmax_inplace(q));

        std::vector<double> z(v_map.c, 0.0);
        for (int c = 0; c < v_map.c; ++c) {
            const float* pv = &v_map.data[v_map.index(ib, c, 0, 0, 0)];
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(pv[i]) * q[i];
            z[c] = acc;
        }
        std::vector<double> logits = linear_forward(p.ch_z, z);
        for (int c = 0; c < x.c; ++c) {
            double g = sigmoid_d(logits[c]);
            record_gate(diag, g);
            scale_channel(x1, ib, c, g);
        }
    }

    // Spatial branch: channel softmax of a pooled query contracts the value
    // map into one spatial gate map.
    Tensor5 q2_map = conv3d(x1, p.sp_q);
    Tensor5 v2_map = conv3d(x1, p.sp_v);
    Tensor5 out = x1;
    for (int ib = 0; ib < x.b; ++ib) {
        std::vector<double> q2 = global_avg_pool(q2_map, ib);
        record_softmax(diag, softmax_inplace(q2));
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int c = 0; c < v2_map.c; ++c)
                acc += q2[c] * v2_map.data[v2_map.index(ib, c, 0, 0, 0) + i];
            double g = sigmoid_d(acc);
            record_gate(diag, g);
            for (int c = 0; c < x.c; ++c) {
                std::size_t idx = out.index(ib, c, 0, 0, 0) + i;
                out.data[idx] = static_cast<float>(static_cast<double>(out.data[idx]) * g);
            }
        }
    }
    return out;
}

Tensor5 danet_forward(const Tensor5& x, const DanetParams& p, AttentionDiag* diag) {
    const std::size_t n = x.spatial();
    Tensor5 q = conv3d(x, p.pos_q);
    Tensor5 k = conv3d(x, p.pos_k);
    Tensor5 v = conv3d(x, p.pos_v);

    Tensor5 out = x;
    std::vector<double> row(n);
    std::vector<std::vector<double>> affinity(n);
    for (int ib = 0; ib < x.b; ++ib) {
        // Position attention: softmax over all voxel affinities per query.
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int c = 0; c < q.c; ++c)
                    acc += static_cast<double>(q.data[q.index(ib, c, 0, 0, 0) + j]) *
                           k.data[k.index(ib, c, 0, 0, 0) + i];
                row[i] = acc;
            }
            record_softmax(diag, softmax_inplace(row));
            affinity[j] = row;
        }
        for (int c = 0; c < x.c; ++c) {
            const float* pv = &v.data[v.index(ib, c, 0, 0, 0)];
            float* po = &out.data[out.index(ib, c, 0, 0, 0)];
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += affinity[j][i] * pv[i];
                po[j] = static_cast<float>(po[j] + p.gamma_pos * acc);
            }
        }

        // Channel attention: softmax over channel-by-channel affinities.
        std::vector<std::vector<double>> ch(x.c, std::vector<double>(x.c));
        for (int c1 = 0; c1 < x.c; ++c1) {
            for (int c2 = 0; c2 < x.c; ++c2) {
                const float* a = &x.data[x.index(ib, c1, 0, 0, 0)];
                const float* b = &x.data[x.index(ib, c2, 0, 0, 0)];
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
                ch[c1][c2] = acc;
            }
            record_softmax(diag, softmax_inplace(ch[c1]));
        }
        for (int c1 = 0; c1 < x.c; ++c1) {
            float* po = &out.data[out.index(ib, c1, 0, 0, 0)];
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int c2 = 0; c2 < x.c; ++c2)
                    acc += ch[c1][c2] * x.data[x.index(ib, c2, 0, 0, 0) + i];
                po[i] = static_cast<float>(po[i] + p.gamma_ch * acc);
            }
        }
    }
    return out;
}

}  // namespace

Tensor5 attention_forward(const Tensor5& x, AttentionKind kind, const AttentionParams& params,
                          AttentionDiag* diag) {
    switch (kind) {
        case AttentionKind::None:
            return x;
        case AttentionKind::Se:
            return se_forward(x, std::get<SeParams>(params), diag);
        case AttentionKind::Sk:
            return sk_forward(x, std::get<SkParams>(params), diag);
        case AttentionKind::Cbam:
            return cbam_forward(x, std::get<CbamParams>(params), diag);
        case AttentionKind::Gate:
            return gate_forward(x, std::get<GateParams>(params), diag);
        case AttentionKind::Polar:
            return polar_forward(x, std::get<PolarParams>(params), diag);
        case AttentionKind::Danet:
            return danet_forward(x, std::get<DanetParams>(params), diag);
    }
    throw std::invalid_argument("unknown attention variant");
}

// ---------------------------------------------------------------------------
// Model

void ModelConfig::validate() const {
    if (in_channels != 1) throw std::invalid_argument("model supports a single input channel");
    if (base_channels < 1) throw std::invalid_argument("base_channels must be >= 1");
    if (num_encoders != 3) throw std::invalid_argument("the encoder depth is fixed at 3");
}

ModelParams init_model_params(const ModelConfig& cfg) {
    cfg.validate();
    const int b = cfg.base_channels;
    Rng rng(cfg.seed);
    ModelParams p;
    p.enc1 = make_reb(cfg.in_channels, b, rng);
    p.enc2 = make_reb(b, 2 * b, rng);
    p.enc3 = make_reb(2 * b, 4 * b, rng);
    p.bottleneck = make_reb(4 * b, 4 * b, rng);
    p.attention = make_attention(cfg.attention, 4 * b, rng);
    p.dec1.conv = make_conv(4 * b, 8 * b, 3, rng);
    p.dec2.conv = make_conv(2 * b, 6 * b, 3, rng);
    p.dec3.conv = make_conv(b, 3 * b, 3, rng);
    p.head = make_conv(1, b, 1, rng);
    // Aux heads are always initialized so the main output does not depend
    // on whether deep supervision is enabled.
    p.aux1 = make_conv(1, 4 * b, 1, rng);
    p.aux2 = make_conv(1, 2 * b, 1, rng);
    return p;
}

namespace {

Tensor5 decode_stage(const Tensor5& below, const Tensor5& skip, const DecoderStage& stage) {
    Tensor5 up = upsample3d_2x(below);
    Tensor5 cat = concat_channels(up, skip);
    return relu(instance_norm(conv3d(cat, stage.conv)));
}

}  // namespace

ModelOutput model_forward(const Tensor5& x, const ModelConfig& cfg, const ModelParams& params,
                          AttentionDiag* diag) {
    cfg.validate();
    if (x.c != cfg.in_channels) throw std::invalid_argument("model_forward: channel mismatch");
    if (x.d % 8 != 0 || x.h % 8 != 0 || x.w % 8 != 0 || x.d < 8 || x.h < 8 || x.w < 8)
        throw std::invalid_argument("model_forward: spatial dims must be divisible by 8");
    if (params.enc1.convs.empty()) throw std::invalid_argument("model_forward: uninitialized params");

    Tensor5 e1 = reb_forward(x, params.enc1);
    Tensor5 e2 = reb_forward(maxpool3d_2x(e1), params.enc2);
    Tensor5 e3 = reb_forward(maxpool3d_2x(e2), params.enc3);
    Tensor5 deepest = maxpool3d_2x(e3);

    Tensor5 bottleneck = reb_forward(deepest, params.bottleneck);
    Tensor5 fused = cfg.attention == AttentionKind::None
                        ? std::move(bottleneck)
                        : add(bottleneck,
                              attention_forward(deepest, cfg.attention, params.attention, diag));

    Tensor5 d1 = decode_stage(fused, e3, params.dec1);
    Tensor5 d2 = decode_stage(d1, e2, params.dec2);
    Tensor5 d3 = decode_stage(d2, e1, params.dec3);

    ModelOutput out;
    out.main = sigmoid(conv3d(d3, params.head));
    if (cfg.ds_heads) {
        out.aux.push_back(resize3d(sigmoid(conv3d(d1, params.aux1)), x.d, x.h, x.w));
        out.aux.push_back(resize3d(sigmoid(conv3d(d2, params.aux2)), x.d, x.h, x.w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization and hashing

namespace {

void for_each_tensor(ModelParams& p, AttentionKind kind,
                     const std::function<void(const std::string&, std::vector<float>&)>& fn) {
    auto conv = [&](const std::string& name, ConvParams& c) {
        fn(name + ".weight", c.weight);
        fn(name + ".bias", c.bias);
    };
    auto linear = [&](const std::string& name, LinearParams& l) {
        fn(name + ".weight", l.weight);
        fn(name + ".bias", l.bias);
    };
    auto reb = [&](const std::string& name, RebParams& r) {
        for (std::size_t i = 0; i < r.convs.size(); ++i)
            conv(name + ".conv" + std::to_string(i), r.convs[i]);
        if (r.projection) conv(name + ".projection", *r.projection);
    };

    reb("enc1", p.enc1);
    reb("enc2", p.enc2);
    reb("enc3", p.enc3);
    reb("bottleneck", p.bottleneck);
    switch (kind) {
        case AttentionKind::None:
            break;
        case AttentionKind::Se: {
            auto& a = std::get<SeParams>(p.attention);
            linear("attention.fc1", a.fc1);
            linear("attention.fc2", a.fc2);
            break;
        }
        case AttentionKind::Sk: {
            auto& a = std::get<SkParams>(p.attention);
            conv("attention.branch_a", a.branch_a);
            conv("attention.branch_b", a.branch_b);
            linear("attention.reduce", a.reduce);
            linear("attention.select_a", a.select_a);
            linear("attention.select_b", a.select_b);
            break;
        }
        case AttentionKind::Cbam: {
            auto& a = std::get<CbamParams>(p.attention);
            linear("attention.mlp1", a.mlp1);
            linear("attention.mlp2", a.mlp2);
            conv("attention.spatial", a.spatial);
            break;
        }
        case AttentionKind::Gate: {
            auto& a = std::get<GateParams>(p.attention);
            conv("attention.gating", a.gating);
            conv("attention.theta", a.theta);
            conv("attention.phi", a.phi);
            conv("attention.psi", a.psi);
            break;
        }
        case AttentionKind::Polar: {
            auto& a = std::get<PolarParams>(p.attention);
            conv("attention.ch_q", a.ch_q);
            conv("attention.ch_v", a.ch_v);
            linear("attention.ch_z", a.ch_z);
            conv("attention.sp_q", a.sp_q);
            conv("attention.sp_v", a.sp_v);
            break;
        }
        case AttentionKind::Danet: {
            auto& a = std::get<DanetParams>(p.attention);
            conv("attention.pos_q", a.pos_q);
            conv("attention.pos_k", a.pos_k);
            conv("attention.pos_v", a.pos_v);
            break;
        }
    }
    conv("dec1", p.dec1.conv);
    conv("dec2", p.dec2.conv);
    conv("dec3", p.dec3.conv);
    conv("head", p.head);
    conv("aux1", p.aux1);
    conv("aux2", p.aux2);
}

std::string params_stem(const std::string& path) {
    auto ends_with = [&](const std::string& s) {
        return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".ctparams.json")) return path.substr(0, path.size() - 5);
    if (ends_with(".ctparams.raw")) return path.substr(0, path.size() - 4);
    if (ends_with(".ctparams")) return path;
    return path + ".ctparams";
}

}  // namespace

void write_model_params(const ModelParams& params, const ModelConfig& cfg,
                        const std::string& path) {
    std::string stem = params_stem(path);
    ModelParams copy = params;

    nlohmann::ordered_json header;
    header["config"] = {{"in_channels", cfg.in_channels},
                        {"base_channels", cfg.base_channels},
                        {"num_encoders", cfg.num_encoders},
                        {"attention", to_string(cfg.attention)},
                        {"seed", cfg.seed}};
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();

    std::vector<char> blob;
    for_each_tensor(copy, cfg.attention, [&](const std::string& name, std::vector<float>& t) {
        nlohmann::ordered_json entry;
        entry["name"] = name;
        entry["count"] = t.size();
        entry["offset"] = blob.size();
        tensors.push_back(entry);
        std::size_t old = blob.size();
        blob.resize(old + t.size() * 4);
        std::memcpy(blob.data() + old, t.data(), t.size() * 4);
    });
    header["tensors"] = tensors;

    std::ofstream jf(stem + ".json", std::ios::binary);
    if (!jf) throw std::runtime_error("cannot open for writing: " + stem + ".json");
    jf << header.dump(2) << "\n";
    std::ofstream rf(stem + ".raw", std::ios::binary);
    if (!rf) throw std::runtime_error("cannot open for writing: " + stem + ".raw");
    rf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!rf) throw std::runtime_error("I/O failure writing: " + stem + ".raw");
}

std::pair<ModelParams, ModelConfig> read_model_params(const std::string& path) {
    std::string stem = params_stem(path);
    nlohmann::json header;
    {
        std::ifstream jf(stem + ".json", std::ios::binary);
        if (!jf) throw std::runtime_error("missing params header: " + stem + ".json");
        jf >> header;
    }
    ModelConfig cfg;
    cfg.in_channels = header.at("config").at("in_channels").get<int>();
    cfg.base_channels = header.at("config").at("base_channels").get<int>();
    cfg.num_encoders = header.at("config").at("num_encoders").get<int>();
    cfg.attention = attention_kind_from_string(header.at("config").at("attention").get<std::string>());
    cfg.seed = header.at("config").at("seed").get<std::uint64_t>();

    std::vector<char> blob;
    {
        std::ifstream rf(stem + ".raw", std::ios::binary);
        if (!rf) throw std::runtime_error("missing params blob: " + stem + ".raw");
        rf.seekg(0, std::ios::end);
        blob.resize(static_cast<std::size_t>(rf.tellg()));
        rf.seekg(0, std::ios::beg);
        if (!blob.empty() && !rf.read(blob.data(), static_cast<std::streamsize>(blob.size())))
            throw std::runtime_error("read failure: " + stem + ".raw");
    }

    std::map<std::string, std::pair<std::size_t, std::size_t>> layout;  // name -> (offset, count)
    for (const auto& t : header.at("tensors"))
        layout[t.at("name").get<std::string>()] = {t.at("offset").get<std::size_t>(),
                                                   t.at("count").get<std::size_t>()};

    ModelParams params = init_model_params(cfg);
    for_each_tensor(params, cfg.attention, [&](const std::string& name, std::vector<float>& t) {
        auto it = layout.find(name);
        if (it == layout.end()) throw std::runtime_error("params blob missing tensor: " + name);
        auto [offset, count] = it->second;
        if (count != t.size())
            throw std::runtime_error("params tensor size mismatch for " + name);
        if (offset + count * 4 > blob.size())
            throw std::runtime_error("params blob truncated at tensor " + name);
        std::memcpy(t.data(), blob.data() + offset, count * 4);
    });
    return {std::move(params), cfg};
}

std::uint64_t tensor_hash(const Tensor5& t) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (float f : t.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int i = 0; i < 4; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace ctseg
