#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mixf/ops.h"
#include "mixf/rng.h"
#include "mixf/tensor.h"

namespace mixf {

enum class HeadKind { classification, regression };

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;
    std::size_t d_ff = 128;
    std::size_t max_len = 128;
    HeadKind head = HeadKind::classification;
    std::size_t n_classes = 2;  // ignored for regression
    double dropout_rate = 0.1;
    std::uint64_t seed = 0;

    /// Throws ValidationError describing the first violated constraint.
    void validate() const;
    /// Logit count for classification, 1 for regression.
    std::size_t output_width() const;
};

/// A batch of padded token rows ready for the encoder.
struct EncodedBatch {
    std::size_t batch_size = 0;
    std::size_t seq_len = 0;
    std::vector<int> token_ids;       // batch_size x seq_len, row-major
    std::vector<int> attention_mask;  // 1 = real token, 0 = PAD
    std::vector<int> class_labels;    // classification only
    Tensor targets;                   // one-hot rows [b x c] or scalars [b x 1]

    int token(std::size_t row, std::size_t pos) const { return token_ids[row * seq_len + pos]; }
    int mask(std::size_t row, std::size_t pos) const { return attention_mask[row * seq_len + pos]; }
};

/// Named, ordered trainable tensors of the encoder, pooler and head.
///
/// The same type is used for gradients and optimizer moments, so every
/// slot always has a twin of identical shape in those sets.
class Parameters {
public:
    /// Zero-filled tensors in the canonical layout for config.
    explicit Parameters(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    std::size_t count() const { return tensors_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& tensor(std::size_t i) { return tensors_[i]; }
    const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    const std::vector<std::string>& names() const { return names_; }

    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index(std::string_view name) const;
    Tensor& at(std::string_view name) { return tensors_[index(name)]; }
    const Tensor& at(std::string_view name) const { return tensors_[index(name)]; }

    /// Weight matrices receive weight decay; biases and layer-norm parameters do not.
    bool decays(std::size_t i) const;

    Parameters zeros_like() const;
    std::size_t element_count() const;
    bool identical(const Parameters& other) const;
    /// Replaces every tensor; shapes must match the layout.
    void assign(std::vector<Tensor> tensors);

private:
    void add(std::string name, std::vector<std::size_t> shape);

    ModelConfig config_;
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Forward value of a model stage plus its backward pass. backward adds
/// parameter gradients into grads and returns the gradient with respect to
/// the stage's data input (empty for encode, whose input is token ids).
struct ModelDual {
    Tensor output;
    std::function<Tensor(const Tensor& upstream, Parameters& grads)> backward;
};

/// Intermediate values exposed for inspection in tests.
struct EncodeTrace {
    /// Attention weights indexed [layer][row * n_heads + head], each [L x L].
    std::vector<std::vector<Tensor>> attention;
    /// Final-layer hidden states [b*L x d_model].
    Tensor final_hidden;
};

/// Xavier-uniform weights, zero biases, unit layer-norm gains, all drawn
/// from an Rng seeded with config.seed.
Parameters init_params(const ModelConfig& config);

/// Fixed sinusoidal position table [len x d_model].
Tensor positional_encoding(std::size_t len, std::size_t d_model);

/// Transformer encoder followed by CLS pooling; output is [b x d_model].
/// Dropout is applied only when train_mode is set, drawing masks from rng.
ModelDual encode(const Parameters& params, const EncodedBatch& batch, bool train_mode, Rng* rng,
                 EncodeTrace* trace = nullptr);

/// tanh(hidden[position 0] * W + b) per row; hidden is [b*L x d_model].
ModelDual pool_cls(const Parameters& params, const Tensor& hidden, std::size_t batch_size,
                   std::size_t seq_len);

/// Affine classifier/regressor over pooled vectors.
ModelDual head_forward(const Parameters& params, const Tensor& pooled);

/// Binary parameter file: "MIXF0001", u64 LE header length, JSON header
/// {name: shape}, then little-endian doubles in header order.
void save_params(const Parameters& params, const std::filesystem::path& path);
/// Loads and checks every tensor against the layout implied by expected.
Parameters load_params(const std::filesystem::path& path, const ModelConfig& expected);

struct NamedTensor {
    std::string name;
    Tensor value;
};
/// Raw reader for the parameter file format, without layout checks.
std::vector<NamedTensor> read_param_file(const std::filesystem::path& path);

}  // namespace mixf
