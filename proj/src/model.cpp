#include "mixf/model.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "mixf/errors.h"

namespace mixf {

static_assert(std::endian::native == std::endian::little,
              "parameter files are written as little-endian doubles");

namespace {

constexpr double kMaskedScore = -1e9;
constexpr double kLayerNormEps = 1e-5;
constexpr char kMagic[8] = {'M', 'I', 'X', 'F', '0', '0', '0', '1'};

std::string layer_prefix(std::size_t l) { return "layers." + std::to_string(l) + "."; }

// x * W + b as one stage; backward returns {dx, dW, db}.
DualResult linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    DualResult prod = matmul(x, w);
    DualResult biased = add_row_bias(prod.output, b);
    return {biased.output, [prod = std::move(prod), biased = std::move(biased)](const Tensor& up) {
                auto gb = biased.backward(up);
                auto gp = prod.backward(gb[0]);
                return std::vector<Tensor>{gp[0], gp[1], gb[1]};
            }};
}

Tensor dropout_mask(Rng& rng, std::size_t rows, std::size_t cols, double rate) {
    Tensor mask = Tensor::matrix(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : mask.values()) v = rng.uniform() >= rate ? keep_scale : 0.0;
    return mask;
}

struct LayerSlots {
    std::size_t q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
    std::size_t ln1_g, ln1_b, ff_in_w, ff_in_b, ff_out_w, ff_out_b, ln2_g, ln2_b;
};

LayerSlots layer_slots(const Parameters& p, std::size_t l) {
    const std::string pre = layer_prefix(l);
    auto i = [&](const char* suffix) { return p.index(pre + suffix); };
    return {i("attn.q.weight"), i("attn.q.bias"),     i("attn.k.weight"),   i("attn.k.bias"),
            i("attn.v.weight"), i("attn.v.bias"),     i("attn.o.weight"),   i("attn.o.bias"),
            i("ln1.gain"),      i("ln1.bias"),        i("ffn.in.weight"),   i("ffn.in.bias"),
            i("ffn.out.weight"), i("ffn.out.bias"),   i("ln2.gain"),        i("ln2.bias")};
}

struct HeadCache {
    DualResult key_t, scores, scaled, probs, ctx;
    std::optional<DualResult> dropped;
};

struct LayerCache {
    LayerSlots slots;
    DualResult q, k, v;
    std::vector<HeadCache> heads;  // row * n_heads + head
    DualResult proj, ln1, ff_in, act, ff_out, ln2;
    std::optional<DualResult> ff_drop;
};

void validate_batch(const ModelConfig& cfg, const EncodedBatch& batch) {
    const std::size_t n = batch.batch_size * batch.seq_len;
    if (batch.batch_size == 0 || batch.seq_len == 0) throw ValidationError("encode: empty batch");
    if (batch.seq_len > cfg.max_len) {
        throw ValidationError("encode: sequence length " + std::to_string(batch.seq_len) +
                              " exceeds max_len " + std::to_string(cfg.max_len));
    }
    if (batch.token_ids.size() != n || batch.attention_mask.size() != n) {
        throw ValidationError("encode: token/mask arrays do not match batch_size x seq_len");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int t = batch.token_ids[i];
        if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
            throw ValidationError("encode: token id " + std::to_string(t) + " at row " +
                                  std::to_string(i / batch.seq_len) + ", position " +
                                  std::to_string(i % batch.seq_len) + " is outside [0, " +
                                  std::to_string(cfg.vocab_size) + ")");
        }
    }
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ValidationError("model config: " + msg); };
    if (vocab_size == 0) fail("vocab_size must be positive");
    if (d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0 || max_len == 0) {
        fail("d_model, n_heads, n_layers, d_ff and max_len must be positive");
    }
    if (d_model % n_heads != 0) {
        fail("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
             std::to_string(n_heads));
    }
    if (head == HeadKind::classification && n_classes < 2) fail("classification needs n_classes >= 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must be in [0, 1)");
}

std::size_t ModelConfig::output_width() const {
    return head == HeadKind::classification ? n_classes : 1;
}

Parameters::Parameters(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::size_t d = config_.d_model;
    add("embedding.weight", {config_.vocab_size, d});
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        const std::string pre = layer_prefix(l);
        for (const char* proj : {"q", "k", "v", "o"}) {
            add(pre + "attn." + proj + ".weight", {d, d});
            add(pre + "attn." + proj + ".bias", {d});
        }
        add(pre + "ln1.gain", {d});
        add(pre + "ln1.bias", {d});
        add(pre + "ffn.in.weight", {d, config_.d_ff});
        add(pre + "ffn.in.bias", {config_.d_ff});
        add(pre + "ffn.out.weight", {config_.d_ff, d});
        add(pre + "ffn.out.bias", {d});
        add(pre + "ln2.gain", {d});
        add(pre + "ln2.bias", {d});
    }
    add("pooler.weight", {d, d});
    add("pooler.bias", {d});
    add("head.weight", {d, config_.output_width()});
    add("head.bias", {config_.output_width()});
}

void Parameters::add(std::string name, std::vector<std::size_t> shape) {
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    tensors_.emplace_back(std::move(shape), 0.0);
}

std::optional<std::size_t> Parameters::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t Parameters::index(std::string_view name) const {
    auto i = find(name);
    if (!i) throw ValidationError("unknown parameter '" + std::string(name) + "'");
    return *i;
}

bool Parameters::decays(std::size_t i) const {
    return names_[i].ends_with(".weight");
}

Parameters Parameters::zeros_like() const { return Parameters(config_); }

std::size_t Parameters::element_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

bool Parameters::identical(const Parameters& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (!tensors_[i].identical(other.tensors_[i])) return false;
    }
    return true;
}

void Parameters::assign(std::vector<Tensor> tensors) {
    if (tensors.size() != tensors_.size()) {
        throw DimensionError("Parameters::assign: expected " + std::to_string(tensors_.size()) +
                             " tensors, got " + std::to_string(tensors.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (!tensors[i].same_shape(tensors_[i])) {
            throw DimensionError("Parameters::assign: '" + names_[i] + "' expects " +
                                 tensors_[i].shape_string() + ", got " + tensors[i].shape_string());
        }
    }
    tensors_ = std::move(tensors);
}

Parameters init_params(const ModelConfig& config) {
    Parameters params(config);
    Rng rng(config.seed);
    for (std::size_t i = 0; i < params.count(); ++i) {
        const std::string& name = params.name(i);
        Tensor& t = params.tensor(i);
        if (name.ends_with(".weight")) {
            const double fan_in = static_cast<double>(t.rows());
            const double fan_out = static_cast<double>(t.cols());
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (double& v : t.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
        } else if (name.ends_with(".gain")) {
            t.fill(1.0);
        }
    }
    return params;
}

Tensor positional_encoding(std::size_t len, std::size_t d_model) {
    Tensor pe = Tensor::matrix(len, d_model);
    for (std::size_t pos = 0; pos < len; ++pos) {
        for (std::size_t i = 0; i < d_model; i += 2) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
            pe.at(pos, i) = std::sin(angle);
            if (i + 1 < d_model) pe.at(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

ModelDual pool_cls(const Parameters& params, const Tensor& hidden, std::size_t batch_size,
                   std::size_t seq_len) {
    const std::size_t d = params.config().d_model;
    if (hidden.rows() != batch_size * seq_len || hidden.cols() != d) {
        throw DimensionError("pool_cls: hidden " + hidden.shape_string() + " does not match " +
                             std::to_string(batch_size) + " rows of length " + std::to_string(seq_len));
    }
    Tensor cls = Tensor::matrix(batch_size, d);
    for (std::size_t b = 0; b < batch_size; ++b) {
        auto src = hidden.row(b * seq_len);
        std::copy(src.begin(), src.end(), cls.row(b).begin());
    }
    const std::size_t w = params.index("pooler.weight");
    const std::size_t bias = params.index("pooler.bias");
    auto lin = std::make_shared<DualResult>(linear(cls, params.tensor(w), params.tensor(bias)));
    auto act = std::make_shared<DualResult>(tanh_act(lin->output));
    return {act->output, [lin, act, w, bias, batch_size, seq_len, d](const Tensor& up, Parameters& grads) {
                auto g = lin->backward(act->backward(up)[0]);
                grads.tensor(w).add_scaled(g[1]);
                grads.tensor(bias).add_scaled(g[2]);
                Tensor dhidden = Tensor::matrix(batch_size * seq_len, d);
                for (std::size_t b = 0; b < batch_size; ++b) {
                    auto src = g[0].row(b);
                    std::copy(src.begin(), src.end(), dhidden.row(b * seq_len).begin());
                }
                return dhidden;
            }};
}

ModelDual head_forward(const Parameters& params, const Tensor& pooled) {
    if (pooled.rank() != 2 || pooled.cols() != params.config().d_model) {
        throw DimensionError("head_forward: pooled " + pooled.shape_string() + " is not [b x " +
                             std::to_string(params.config().d_model) + "]");
    }
    const std::size_t w = params.index("head.weight");
    const std::size_t bias = params.index("head.bias");
    auto lin = std::make_shared<DualResult>(linear(pooled, params.tensor(w), params.tensor(bias)));
    return {lin->output, [lin, w, bias](const Tensor& up, Parameters& grads) {
                auto g = lin->backward(up);
                grads.tensor(w).add_scaled(g[1]);
                grads.tensor(bias).add_scaled(g[2]);
                return g[0];
            }};
}

ModelDual encode(const Parameters& params, const EncodedBatch& batch, bool train_mode, Rng* rng,
                 EncodeTrace* trace) {
    const ModelConfig& cfg = params.config();
    validate_batch(cfg, batch);
    const std::size_t B = batch.batch_size;
    const std::size_t L = batch.seq_len;
    const std::size_t D = cfg.d_model;
    const std::size_t H = cfg.n_heads;
    const std::size_t dk = D / H;
    const bool use_dropout = train_mode && cfg.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr) throw ValidationError("encode: dropout requires an rng");

    const std::size_t emb_slot = params.index("embedding.weight");
    const Tensor& emb = params.tensor(emb_slot);
    const double emb_scale = std::sqrt(static_cast<double>(D));
    const Tensor pe = positional_encoding(L, D);

    Tensor x = Tensor::matrix(B * L, D);
    for (std::size_t n = 0; n < B * L; ++n) {
        auto src = emb.row(static_cast<std::size_t>(batch.token_ids[n]));
        auto pos = pe.row(n % L);
        auto dst = x.row(n);
        for (std::size_t c = 0; c < D; ++c) dst[c] = src[c] * emb_scale + pos[c];
    }

    // Additive key mask per batch row: 0 for real tokens, -1e9 for PAD.
    std::vector<std::vector<double>> key_bias(B, std::vector<double>(L, 0.0));
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < L; ++j)
            if (batch.mask(b, j) == 0) key_bias[b][j] = kMaskedScore;

    if (trace) trace->attention.assign(cfg.n_layers, {});
    const double score_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    auto layers = std::make_shared<std::vector<LayerCache>>();
    layers->reserve(cfg.n_layers);

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const LayerSlots s = layer_slots(params, l);
        auto p = [&](std::size_t i) -> const Tensor& { return params.tensor(i); };
        LayerCache lc{s,
                      linear(x, p(s.q_w), p(s.q_b)),
                      linear(x, p(s.k_w), p(s.k_b)),
                      linear(x, p(s.v_w), p(s.v_b)),
                      {}, {}, {}, {}, {}, {}, {}, {}};
        lc.heads.reserve(B * H);

        Tensor ctx = Tensor::matrix(B * L, D);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t h = 0; h < H; ++h) {
                Tensor qb = slice_block(lc.q.output, b * L, L, h * dk, dk);
                Tensor kb = slice_block(lc.k.output, b * L, L, h * dk, dk);
                Tensor vb = slice_block(lc.v.output, b * L, L, h * dk, dk);
                HeadCache hc;
                hc.key_t = transpose(kb);
                hc.scores = matmul(qb, hc.key_t.output);
                hc.scaled = scale(hc.scores.output, score_scale);
                Tensor masked = hc.scaled.output;
                for (std::size_t i = 0; i < L; ++i) {
                    auto row = masked.row(i);
                    for (std::size_t j = 0; j < L; ++j) row[j] += key_bias[b][j];
                }
                hc.probs = softmax_rows(masked);
                if (trace) trace->attention[l].push_back(hc.probs.output);
                const Tensor* weights = &hc.probs.output;
                if (use_dropout) {
                    hc.dropped = multiply_const(hc.probs.output, dropout_mask(*rng, L, L, cfg.dropout_rate));
                    weights = &hc.dropped->output;
                }
                hc.ctx = matmul(*weights, vb);
                add_block(ctx, hc.ctx.output, b * L, h * dk);
                lc.heads.push_back(std::move(hc));
            }
        }

        lc.proj = linear(ctx, p(s.o_w), p(s.o_b));
        Tensor resid1 = x;
        resid1.add_scaled(lc.proj.output);
        lc.ln1 = layer_norm(resid1, p(s.ln1_g), p(s.ln1_b), kLayerNormEps);
        lc.ff_in = linear(lc.ln1.output, p(s.ff_in_w), p(s.ff_in_b));
        lc.act = gelu(lc.ff_in.output);
        lc.ff_out = linear(lc.act.output, p(s.ff_out_w), p(s.ff_out_b));
        Tensor resid2 = lc.ln1.output;
        if (use_dropout) {
            lc.ff_drop = multiply_const(lc.ff_out.output, dropout_mask(*rng, B * L, D, cfg.dropout_rate));
            resid2.add_scaled(lc.ff_drop->output);
        } else {
            resid2.add_scaled(lc.ff_out.output);
        }
        lc.ln2 = layer_norm(resid2, p(s.ln2_g), p(s.ln2_b), kLayerNormEps);
        x = lc.ln2.output;
        layers->push_back(std::move(lc));
    }

    if (trace) trace->final_hidden = x;
    auto pooled = std::make_shared<ModelDual>(pool_cls(params, x, B, L));
    auto token_ids = batch.token_ids;

    return {pooled->output,
            [layers, pooled, token_ids = std::move(token_ids), emb_slot, emb_scale, B, L, D, H, dk](
                const Tensor& up, Parameters& grads) {
                Tensor dx = pooled->backward(up, grads);
                for (auto it = layers->rbegin(); it != layers->rend(); ++it) {
                    LayerCache& lc = *it;
                    const LayerSlots& s = lc.slots;
                    auto acc = [&](std::size_t slot, const Tensor& g) { grads.tensor(slot).add_scaled(g); };

                    auto g_ln2 = lc.ln2.backward(dx);
                    acc(s.ln2_g, g_ln2[1]);
                    acc(s.ln2_b, g_ln2[2]);
                    Tensor d_ln1 = g_ln2[0];
                    Tensor d_ff = lc.ff_drop ? lc.ff_drop->backward(g_ln2[0])[0] : g_ln2[0];
                    auto g_out = lc.ff_out.backward(d_ff);
                    acc(s.ff_out_w, g_out[1]);
                    acc(s.ff_out_b, g_out[2]);
                    auto g_in = lc.ff_in.backward(lc.act.backward(g_out[0])[0]);
                    acc(s.ff_in_w, g_in[1]);
                    acc(s.ff_in_b, g_in[2]);
                    d_ln1.add_scaled(g_in[0]);

                    auto g_ln1 = lc.ln1.backward(d_ln1);
                    acc(s.ln1_g, g_ln1[1]);
                    acc(s.ln1_b, g_ln1[2]);
                    Tensor d_resid1 = g_ln1[0];
                    auto g_proj = lc.proj.backward(d_resid1);
                    acc(s.o_w, g_proj[1]);
                    acc(s.o_b, g_proj[2]);
                    const Tensor& d_ctx = g_proj[0];

                    Tensor dq = Tensor::matrix(B * L, D);
                    Tensor dk_all = Tensor::matrix(B * L, D);
                    Tensor dv = Tensor::matrix(B * L, D);
                    for (std::size_t b = 0; b < B; ++b) {
                        for (std::size_t h = 0; h < H; ++h) {
                            HeadCache& hc = lc.heads[b * H + h];
                            auto g_ctx = hc.ctx.backward(slice_block(d_ctx, b * L, L, h * dk, dk));
                            add_block(dv, g_ctx[1], b * L, h * dk);
                            Tensor d_probs = hc.dropped ? hc.dropped->backward(g_ctx[0])[0] : g_ctx[0];
                            Tensor d_scaled = hc.probs.backward(d_probs)[0];
                            auto g_scores = hc.scores.backward(hc.scaled.backward(d_scaled)[0]);
                            add_block(dq, g_scores[0], b * L, h * dk);
                            add_block(dk_all, hc.key_t.backward(g_scores[1])[0], b * L, h * dk);
                        }
                    }
                    auto g_q = lc.q.backward(dq);
                    auto g_k = lc.k.backward(dk_all);
                    auto g_v = lc.v.backward(dv);
                    acc(s.q_w, g_q[1]);
                    acc(s.q_b, g_q[2]);
                    acc(s.k_w, g_k[1]);
                    acc(s.k_b, g_k[2]);
                    acc(s.v_w, g_v[1]);
                    acc(s.v_b, g_v[2]);
                    dx = d_resid1;
                    dx.add_scaled(g_q[0]);
                    dx.add_scaled(g_k[0]);
                    dx.add_scaled(g_v[0]);
                }
                Tensor& demb = grads.tensor(emb_slot);
                for (std::size_t n = 0; n < B * L; ++n) {
                    auto dst = demb.row(static_cast<std::size_t>(token_ids[n]));
                    auto src = dx.row(n);
                    for (std::size_t c = 0; c < D; ++c) dst[c] += src[c] * emb_scale;
                }
                return Tensor{};
            }};
}

void save_params(const Parameters& params, const std::filesystem::path& path) {
    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < params.count(); ++i) header[params.name(i)] = params.tensor(i).shape();
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : params.tensors()) {
        auto v = t.values();
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
    }
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::vector<NamedTensor> read_param_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open parameter file '" + path.string() + "'");
    const std::string where = " in '" + path.string() + "'";

    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw LoadError("bad magic" + where + " (expected MIXF0001)");
    }
    std::uint64_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) throw LoadError("truncated header length" + where);
    const auto file_size = std::filesystem::file_size(path);
    if (len > file_size) throw LoadError("header length exceeds file size" + where);
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw LoadError("truncated header" + where);

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed header" + where + ": " + e.what());
    }
    if (!header.is_object()) throw LoadError("header is not an object" + where);

    std::vector<NamedTensor> out;
    for (const auto& [name, shape_json] : header.items()) {
        std::vector<std::size_t> shape;
        try {
            shape = shape_json.get<std::vector<std::size_t>>();
        } catch (const nlohmann::json::exception&) {
            throw LoadError("tensor '" + name + "' has a malformed shape" + where);
        }
        Tensor t;
        try {
            t = Tensor(shape, 0.0);
        } catch (const DimensionError& e) {
            throw LoadError("tensor '" + name + "': " + e.what() + where);
        }
        auto v = t.values();
        if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()))) {
            throw LoadError("truncated data for tensor '" + name + "'" + where);
        }
        out.push_back({name, std::move(t)});
    }
    if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after tensor data" + where);
    return out;
}

Parameters load_params(const std::filesystem::path& path, const ModelConfig& expected) {
    std::vector<NamedTensor> loaded = read_param_file(path);
    Parameters params(expected);
    if (loaded.size() != params.count()) {
        throw LoadError("parameter file '" + path.string() + "' holds " + std::to_string(loaded.size()) +
                        " tensors, model expects " + std::to_string(params.count()));
    }
    std::vector<Tensor> tensors;
    tensors.reserve(loaded.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        if (loaded[i].name != params.name(i)) {
            throw LoadError("tensor " + std::to_string(i) + " is '" + loaded[i].name + "', expected '" +
                            params.name(i) + "'");
        }
        if (!loaded[i].value.same_shape(params.tensor(i))) {
            throw LoadError("tensor '" + loaded[i].name + "': expected shape " +
                            params.tensor(i).shape_string() + ", found " + loaded[i].value.shape_string());
        }
        tensors.push_back(std::move(loaded[i].value));
    }
    params.assign(std::move(tensors));
    return params;
}

}  // namespace mixf
