#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gk {

using Shape = std::vector<int64_t>;

class Tape;

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated while tracked on a tape
    bool tracked = false;
    Tape* tape = nullptr;
};

}  // namespace detail

/// Dense n-dimensional 64-bit float tensor, row-major. Copies share storage;
/// use clone() for an independent buffer. Gradient tracking is opt-in via
/// Tape::watch — untracked tensors behave as plain constants.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from_data(Shape shape, std::vector<double> data);
    static Tensor scalar(double v);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t rank() const { return static_cast<int64_t>(impl_->shape.size()); }
    int64_t dim(int64_t i) const;  // negative indices count from the back
    int64_t numel() const { return static_cast<int64_t>(impl_->value.size()); }

    double* data() { return impl_->value.data(); }
    const double* data() const { return impl_->value.data(); }
    std::vector<double>& values() { return impl_->value; }
    const std::vector<double>& values() const { return impl_->value; }

    double item() const;
    double at(std::initializer_list<int64_t> idx) const;
    double& at_mut(std::initializer_list<int64_t> idx);

    Tensor clone() const;

    bool tracked() const { return impl_ && impl_->tracked; }
    Tape* tape() const { return impl_ ? impl_->tape : nullptr; }
    /// Gradient buffer of a tracked tensor after Tape::backward.
    const std::vector<double>& grad() const;

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Reverse-mode tape: an ordered record of primitive ops. One tape and its
/// tensors form a single-threaded training context; backward visits nodes
/// exactly once in reverse execution order.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape() { clear(); }

    /// Marks a tensor as a tracked leaf (gradient target) on this tape.
    void watch(Tensor& t);

    /// Called by ops: marks `out` tracked and appends its backward closure.
    void record(const std::shared_ptr<detail::TensorImpl>& out, std::function<void()> backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates to every tracked leaf.
    void backward(const Tensor& loss);

    /// Detaches every touched tensor and drops all nodes.
    void clear();

    size_t num_nodes() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
    std::vector<std::shared_ptr<detail::TensorImpl>> touched_;
};

/// Eager NaN/Inf detection after every op (on by default); failures throw
/// NumericError naming the op.
void set_finite_checks(bool on);
bool finite_checks();

namespace detail {
Tape* merge_tapes(std::initializer_list<const Tensor*> inputs);
void check_finite(const Tensor& t, const char* op);
int64_t shape_numel(const Shape& s);
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op);
std::string shape_str(const Shape& s);
}  // namespace detail

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor atan(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor softplus(const Tensor& x);

// ---- reductions -----------------------------------------------------------

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// ---- linear algebra / normalization ----------------------------------------

/// Batched matrix product a[..., m, k] x b[..., k, n]; leading batch dims
/// broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
/// Zero mean / unit variance over the last dim, then elementwise affine with
/// gain/bias of shape [C].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// ---- convolution / resampling ----------------------------------------------

/// Cross-correlation of x[B,C,H,W] with kernel[O,C,kh,kw], zero padding.
Tensor conv2d(const Tensor& x, const Tensor& kernel, int64_t stride = 1, int64_t padding = 0);
/// Exact block replication of x[B,C,H,W] by an integer factor >= 1.
Tensor upsample_nearest(const Tensor& x, int64_t factor);

// ---- layout ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int64_t>& dims);
Tensor concat(const std::vector<Tensor>& xs, int64_t dim);
Tensor slice_lastdim(const Tensor& x, int64_t start, int64_t len);
/// out[i, :] = x[idx[i], :] for 2-D x; backward scatter-adds.
Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx);
/// out[i, 0] = x[i, idx[i]] for 2-D x.
Tensor take_per_row(const Tensor& x, const std::vector<int64_t>& idx);

// ---- parameters / optimization ----------------------------------------------

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Truncated normal init (resample outside +-2 sigma), Swin convention.
void fill_trunc_normal(Tensor& t, std::mt19937_64& rng, double sigma = 0.02);
void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi);

/// Classical (heavy-ball) momentum: v <- momentum*v + g; p <- p - lr*v.
void sgd_step(std::vector<double>& param, const std::vector<double>& grad,
              std::vector<double>& velocity, double lr, double momentum);

class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    double momentum() const { return momentum_; }
    /// One update over every tracked parameter with a populated gradient.
    void step(NamedParams& params);

private:
    double lr_;
    double momentum_;
    std::unordered_map<const void*, std::vector<double>> velocity_;
};

}  // namespace gk
