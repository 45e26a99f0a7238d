#include "reachbot/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "reachbot/kernels.hpp"
#include "reachbot/rng.hpp"

namespace reachbot {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

std::array<BlockInfo, 13> make_layout() {
    std::array<BlockInfo, 13> layout{{
        {Block::ActorW0, "actor.w0", kHidden, kObsDim, 0},
        {Block::ActorB0, "actor.b0", kHidden, 1, 0},
        {Block::ActorW1, "actor.w1", kHidden, kHidden, 0},
        {Block::ActorB1, "actor.b1", kHidden, 1, 0},
        {Block::ActorW2, "actor.w2", kActDim, kHidden, 0},
        {Block::ActorB2, "actor.b2", kActDim, 1, 0},
        {Block::CriticW0, "critic.w0", kHidden, kObsDim, 0},
        {Block::CriticB0, "critic.b0", kHidden, 1, 0},
        {Block::CriticW1, "critic.w1", kHidden, kHidden, 0},
        {Block::CriticB1, "critic.b1", kHidden, 1, 0},
        {Block::CriticW2, "critic.w2", 1, kHidden, 0},
        {Block::CriticB2, "critic.b2", 1, 1, 0},
        {Block::LogStd, "log_std", kActDim, 1, 0},
    }};
    std::size_t offset = 0;
    for (BlockInfo& b : layout) {
        b.offset = offset;
        offset += b.rows * b.cols;
    }
    return layout;
}

}  // namespace

const std::array<BlockInfo, 13>& param_layout() {
    static const std::array<BlockInfo, 13> layout = make_layout();
    return layout;
}

std::size_t param_count() {
    const BlockInfo& last = param_layout().back();
    return last.offset + last.rows * last.cols;
}

std::span<double> PolicyParams::block(Block b) {
    const BlockInfo& info = param_layout()[static_cast<std::size_t>(b)];
    return {flat.data() + info.offset, info.rows * info.cols};
}

std::span<const double> PolicyParams::block(Block b) const {
    const BlockInfo& info = param_layout()[static_cast<std::size_t>(b)];
    return {flat.data() + info.offset, info.rows * info.cols};
}

namespace {

// Orthogonal columns via modified Gram-Schmidt with one re-orthogonalization
// pass; rows >= cols is arranged by transposing when needed.
void orthogonal_init(std::span<double> w, std::size_t rows, std::size_t cols, double gain,
                     Rng& rng) {
    const std::size_t n = std::max(rows, cols);
    const std::size_t m = std::min(rows, cols);
    std::vector<double> q(n * m);
    for (double& v : q) v = rng.normal();

    auto col = [&](std::size_t c) { return q.data() + c * n; };
    // column-major n x m
    std::vector<double> tmp(n * m);
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t r = 0; r < n; ++r) tmp[c * n + r] = q[r * m + c];
    }
    q = tmp;

    const auto& ops = kern::scalar_ops();
    for (std::size_t c = 0; c < m; ++c) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < c; ++p) {
                const double proj = ops.dot(col(c), col(p), n);
                ops.axpy(-proj, col(p), col(c), n);
            }
        }
        const double norm = std::sqrt(ops.sum_sq(col(c), n));
        if (norm < 1e-12) throw std::runtime_error("orthogonal_init: degenerate draw");
        ops.scale(col(c), 1.0 / norm, n);
    }

    if (rows >= cols) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) w[r * cols + c] = gain * q[c * n + r];
    } else {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) w[r * cols + c] = gain * q[r * n + c];
    }
}

}  // namespace

PolicyParams init_policy(std::uint64_t seed) {
    PolicyParams p;
    p.flat.assign(param_count(), 0.0);
    Rng rng(splitmix64(seed));

    const double root2 = std::sqrt(2.0);
    struct Plan {
        Block b;
        double gain;
    };
    const Plan plan[] = {
        {Block::ActorW0, root2}, {Block::ActorW1, root2},  {Block::ActorW2, 0.01},
        {Block::CriticW0, root2}, {Block::CriticW1, root2}, {Block::CriticW2, 1.0},
    };
    for (const Plan& item : plan) {
        const BlockInfo& info = param_layout()[static_cast<std::size_t>(item.b)];
        orthogonal_init(p.block(item.b), info.rows, info.cols, item.gain, rng);
    }
    for (double& v : p.block(Block::LogStd)) v = -0.5;
    return p;
}

void clamp_log_std(PolicyParams& params) {
    for (double& v : params.block(Block::LogStd)) {
        v = std::clamp(v, kLogStdMin, kLogStdMax);
    }
}

namespace {

void tanh_inplace(std::span<double> x) {
    for (double& v : x) v = std::tanh(v);
}

}  // namespace

ActorCriticOut actor_critic_forward(const PolicyParams& params, std::span<const double> obs,
                                    ForwardCache* cache) {
    if (obs.size() != static_cast<std::size_t>(kObsDim)) {
        throw std::invalid_argument("actor_critic_forward: observation must have 18 components");
    }
    if (params.flat.size() != param_count()) {
        throw std::invalid_argument("actor_critic_forward: parameter vector has wrong size");
    }
    const auto& ops = kern::active_ops();

    std::array<double, kHidden> h0, h1;
    ActorCriticOut out;

    ops.matvec(params.block(Block::ActorW0).data(), obs.data(),
               params.block(Block::ActorB0).data(), h0.data(), kHidden, kObsDim);
    tanh_inplace(h0);
    ops.matvec(params.block(Block::ActorW1).data(), h0.data(),
               params.block(Block::ActorB1).data(), h1.data(), kHidden, kHidden);
    tanh_inplace(h1);
    ops.matvec(params.block(Block::ActorW2).data(), h1.data(),
               params.block(Block::ActorB2).data(), out.mean.data(), kActDim, kHidden);
    if (cache) {
        std::copy(obs.begin(), obs.end(), cache->obs.begin());
        cache->a_h0 = h0;
        cache->a_h1 = h1;
    }

    ops.matvec(params.block(Block::CriticW0).data(), obs.data(),
               params.block(Block::CriticB0).data(), h0.data(), kHidden, kObsDim);
    tanh_inplace(h0);
    ops.matvec(params.block(Block::CriticW1).data(), h0.data(),
               params.block(Block::CriticB1).data(), h1.data(), kHidden, kHidden);
    tanh_inplace(h1);
    ops.matvec(params.block(Block::CriticW2).data(), h1.data(),
               params.block(Block::CriticB2).data(), &out.value, 1, kHidden);
    if (cache) {
        cache->c_h0 = h0;
        cache->c_h1 = h1;
    }

    const auto log_std = params.block(Block::LogStd);
    for (int i = 0; i < kActDim; ++i) {
        out.std[static_cast<std::size_t>(i)] = std::exp(log_std[static_cast<std::size_t>(i)]);
    }
    return out;
}

namespace {

struct MlpBlocks {
    Block w0, b0, w1, b1, w2, b2;
};

// Shared backward pass for one 2-hidden-layer tanh stack. d_out is the loss
// sensitivity at the linear output (out_dim entries).
void backward_mlp(const PolicyParams& params, std::span<const double> obs,
                  const std::array<double, kHidden>& h0, const std::array<double, kHidden>& h1,
                  std::span<const double> d_out, const MlpBlocks& blocks, std::size_t out_dim,
                  std::span<double> grads) {
    const auto& ops = kern::active_ops();
    const auto& layout = param_layout();
    auto gblock = [&](Block b) {
        const BlockInfo& info = layout[static_cast<std::size_t>(b)];
        return grads.subspan(info.offset, info.rows * info.cols);
    };

    // output layer: gW2[r,:] += d_out[r] * h1 ; gb2 += d_out ; dh1 = W2^T d_out
    std::array<double, kHidden> dh{};
    {
        auto gw2 = gblock(blocks.w2);
        auto gb2 = gblock(blocks.b2);
        const auto w2 = params.block(blocks.w2);
        for (std::size_t r = 0; r < out_dim; ++r) {
            ops.axpy(d_out[r], h1.data(), gw2.data() + r * kHidden, kHidden);
            gb2[r] += d_out[r];
            ops.axpy(d_out[r], w2.data() + r * kHidden, dh.data(), kHidden);
        }
    }

    // hidden layer 1
    std::array<double, kHidden> dz1;
    for (int i = 0; i < kHidden; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        dz1[idx] = dh[idx] * (1.0 - h1[idx] * h1[idx]);
    }
    std::array<double, kHidden> dh0{};
    {
        auto gw1 = gblock(blocks.w1);
        auto gb1 = gblock(blocks.b1);
        const auto w1 = params.block(blocks.w1);
        for (std::size_t r = 0; r < kHidden; ++r) {
            ops.axpy(dz1[r], h0.data(), gw1.data() + r * kHidden, kHidden);
            gb1[r] += dz1[r];
            ops.axpy(dz1[r], w1.data() + r * kHidden, dh0.data(), kHidden);
        }
    }

    // input layer
    std::array<double, kHidden> dz0;
    for (int i = 0; i < kHidden; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        dz0[idx] = dh0[idx] * (1.0 - h0[idx] * h0[idx]);
    }
    {
        auto gw0 = gblock(blocks.w0);
        auto gb0 = gblock(blocks.b0);
        for (std::size_t r = 0; r < kHidden; ++r) {
            ops.axpy(dz0[r], obs.data(), gw0.data() + r * kObsDim, kObsDim);
            gb0[r] += dz0[r];
        }
    }
}

}  // namespace

void backward_actor(const PolicyParams& params, const ForwardCache& cache,
                    std::span<const double> d_mean, std::span<double> grads) {
    backward_mlp(params, cache.obs, cache.a_h0, cache.a_h1, d_mean,
                 {Block::ActorW0, Block::ActorB0, Block::ActorW1, Block::ActorB1, Block::ActorW2,
                  Block::ActorB2},
                 kActDim, grads);
}

void backward_critic(const PolicyParams& params, const ForwardCache& cache, double d_value,
                     std::span<double> grads) {
    const std::array<double, 1> d_out{d_value};
    backward_mlp(params, cache.obs, cache.c_h0, cache.c_h1, d_out,
                 {Block::CriticW0, Block::CriticB0, Block::CriticW1, Block::CriticB1,
                  Block::CriticW2, Block::CriticB2},
                 1, grads);
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> std,
                         std::span<const double> action) {
    double lp = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double z = (action[i] - mean[i]) / std[i];
        lp += -0.5 * z * z - std::log(std[i]) - kHalfLog2Pi;
    }
    return lp;
}

double gaussian_entropy(std::span<const double> std) {
    double h = 0.0;
    for (const double s : std) h += 0.5 + kHalfLog2Pi + std::log(s);
    return h;
}

namespace {

constexpr char kMagic[4] = {'R', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void append_raw(std::string& buf, const T& v) {
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint format is little-endian");
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
    if (params.flat.size() != param_count()) {
        throw std::invalid_argument("save_policy: parameter vector has wrong size");
    }
    std::string buf;
    buf.append(kMagic, 4);
    append_raw(buf, kVersion);
    append_raw(buf, static_cast<std::uint32_t>(param_layout().size()));
    for (const BlockInfo& info : param_layout()) {
        const std::uint32_t name_len = static_cast<std::uint32_t>(std::strlen(info.name));
        append_raw(buf, name_len);
        buf.append(info.name, name_len);
        append_raw(buf, static_cast<std::uint64_t>(info.rows));
        append_raw(buf, static_cast<std::uint64_t>(info.cols));
        buf.append(reinterpret_cast<const char*>(params.flat.data() + info.offset),
                   info.rows * info.cols * sizeof(double));
    }
    atomic_write(path, buf);
}

PolicyParams load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    }
    pos = 4;
    const auto version = read_raw<std::uint32_t>(buf, pos);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto block_count = read_raw<std::uint32_t>(buf, pos);
    if (block_count != param_layout().size()) {
        throw std::runtime_error("checkpoint: unexpected block count");
    }

    PolicyParams params;
    params.flat.assign(param_count(), 0.0);
    for (const BlockInfo& info : param_layout()) {
        const auto name_len = read_raw<std::uint32_t>(buf, pos);
        if (pos + name_len > buf.size()) throw std::runtime_error("checkpoint: truncated file");
        const std::string name(buf.data() + pos, name_len);
        pos += name_len;
        if (name != info.name) {
            throw std::runtime_error("checkpoint: unexpected block '" + name + "'");
        }
        const auto rows = read_raw<std::uint64_t>(buf, pos);
        const auto cols = read_raw<std::uint64_t>(buf, pos);
        if (rows != info.rows || cols != info.cols) {
            throw std::runtime_error("checkpoint: shape mismatch in block '" + name + "'");
        }
        const std::size_t bytes = info.rows * info.cols * sizeof(double);
        if (pos + bytes > buf.size()) throw std::runtime_error("checkpoint: truncated file");
        std::memcpy(params.flat.data() + info.offset, buf.data() + pos, bytes);
        pos += bytes;
    }
    if (pos != buf.size()) throw std::runtime_error("checkpoint: trailing bytes");
    for (const double v : params.flat) {
        if (!std::isfinite(v)) throw std::runtime_error("checkpoint: non-finite parameter");
    }
    return params;
}

}  // namespace reachbot
