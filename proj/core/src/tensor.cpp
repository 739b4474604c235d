#include "graspkit/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "graspkit/error.hpp"

namespace gk {

namespace {
std::atomic<bool> g_finite_checks{true};
}

void set_finite_checks(bool on) { g_finite_checks.store(on, std::memory_order_relaxed); }
bool finite_checks() { return g_finite_checks.load(std::memory_order_relaxed); }

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
    auto im = std::make_shared<detail::TensorImpl>();
    const int64_t n = detail::shape_numel(shape);
    im->shape = std::move(shape);
    im->value.assign(static_cast<size_t>(n), 0.0);
    return Tensor(std::move(im));
}

Tensor Tensor::full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.values()) x = v;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    const int64_t n = detail::shape_numel(shape);
    if (n != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("Tensor::from_data: shape " + detail::shape_str(shape) +
                                    " wants " + std::to_string(n) + " values, got " +
                                    std::to_string(data.size()));
    auto im = std::make_shared<detail::TensorImpl>();
    im->shape = std::move(shape);
    im->value = std::move(data);
    return Tensor(std::move(im));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

int64_t Tensor::dim(int64_t i) const {
    const int64_t r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw std::invalid_argument("Tensor::dim: index out of range");
    return impl_->shape[static_cast<size_t>(i)];
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor has " +
                                                  std::to_string(numel()) + " elements");
    return impl_->value[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
    return const_cast<Tensor*>(this)->at_mut(idx);
}

double& Tensor::at_mut(std::initializer_list<int64_t> idx) {
    const Shape& s = impl_->shape;
    if (idx.size() != s.size()) throw std::invalid_argument("Tensor::at: rank mismatch");
    int64_t lin = 0;
    size_t d = 0;
    for (int64_t i : idx) {
        if (i < 0 || i >= s[d]) throw std::invalid_argument("Tensor::at: index out of range");
        lin = lin * s[d] + i;
        ++d;
    }
    return impl_->value[static_cast<size_t>(lin)];
}

Tensor Tensor::clone() const {
    auto im = std::make_shared<detail::TensorImpl>();
    im->shape = impl_->shape;
    im->value = impl_->value;
    return Tensor(std::move(im));
}

const std::vector<double>& Tensor::grad() const {
    if (!tracked()) throw std::invalid_argument("Tensor::grad: tensor is not tracked");
    return impl_->grad;
}

// ---- Tape -------------------------------------------------------------------

void Tape::watch(Tensor& t) {
    auto im = t.impl();
    if (!im) throw std::invalid_argument("Tape::watch: undefined tensor");
    if (im->tracked) {
        if (im->tape != this)
            throw std::invalid_argument("Tape::watch: tensor already tracked on another tape");
        return;
    }
    im->tracked = true;
    im->tape = this;
    im->grad.assign(im->value.size(), 0.0);
    touched_.push_back(std::move(im));
}

void Tape::record(const std::shared_ptr<detail::TensorImpl>& out, std::function<void()> backward) {
    out->tracked = true;
    out->tape = this;
    out->grad.assign(out->value.size(), 0.0);
    touched_.push_back(out);
    nodes_.push_back(std::move(backward));
}

void Tape::backward(const Tensor& loss) {
    if (!loss.tracked() || loss.tape() != this)
        throw std::invalid_argument("Tape::backward: loss is not recorded on this tape");
    if (nodes_.empty()) throw std::invalid_argument("Tape::backward: empty tape");
    if (loss.numel() != 1)
        throw std::invalid_argument("Tape::backward: loss must be scalar, got shape " +
                                    detail::shape_str(loss.shape()));
    loss.impl()->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() {
    for (auto& im : touched_) {
        im->tracked = false;
        im->tape = nullptr;
        im->grad.clear();
        im->grad.shrink_to_fit();
    }
    touched_.clear();
    nodes_.clear();
}

// ---- detail helpers -----------------------------------------------------------

namespace detail {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        if (d < 0) throw std::invalid_argument("negative tensor extent");
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

Tape* merge_tapes(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        if (!t->defined() || !t->tracked()) continue;
        if (tape && t->tape() != tape)
            throw std::invalid_argument("op inputs tracked on different tapes");
        tape = t->tape();
    }
    return tape;
}

void check_finite(const Tensor& t, const char* op) {
    if (!finite_checks()) return;
    for (double v : t.values()) {
        if (!std::isfinite(v))
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    }
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    const size_t ra = a.size(), rb = b.size();
    const size_t r = std::max(ra, rb);
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        const int64_t da = i < r - ra ? 1 : a[i - (r - ra)];
        const int64_t db = i < r - rb ? 1 : b[i - (r - rb)];
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) + " and " +
                                        shape_str(b) + " are not broadcastable");
        out[i] = std::max(da, db);
    }
    return out;
}

}  // namespace detail

// ---- init / optimizer ----------------------------------------------------------

void fill_trunc_normal(Tensor& t, std::mt19937_64& rng, double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    for (double& v : t.values()) {
        double x;
        do {
            x = dist(rng);
        } while (std::abs(x) > 2.0 * sigma);
        v = x;
    }
}

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.values()) v = dist(rng);
}

void sgd_step(std::vector<double>& param, const std::vector<double>& grad,
              std::vector<double>& velocity, double lr, double momentum) {
    if (param.size() != grad.size() || param.size() != velocity.size())
        throw std::invalid_argument("sgd_step: param/grad/velocity size mismatch");
    for (size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i];
        param[i] -= lr * velocity[i];
    }
}

void SgdMomentum::step(NamedParams& params) {
    for (auto& [name, p] : params) {
        if (!p.tracked()) continue;
        auto im = p.impl();
        auto& vel = velocity_[im.get()];
        if (vel.empty()) vel.assign(im->value.size(), 0.0);
        sgd_step(im->value, im->grad, vel, lr_, momentum_);
    }
}

}  // namespace gk
