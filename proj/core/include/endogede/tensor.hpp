#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "endogede/error.hpp"
#include "endogede/rng.hpp"

namespace endogede {

// Dimension sizes, outermost first. Rank-0 (shape {}) holds one scalar.
using Shape = std::vector<int>;

long long shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// Dense row-major float32 tensor with optional gradient accumulator.
// Copies share storage; values are treated as immutable once an op has
// consumed them (grad buffers are the only thing mutated in place).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    static Tensor scalar(float v);
    static Tensor zeros(Shape s) { return Tensor(std::move(s), 0.0f); }
    static Tensor ones(Shape s) { return Tensor(std::move(s), 1.0f); }
    static Tensor full(Shape s, float v) { return Tensor(std::move(s), v); }

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    long long size() const;

    float* data();
    const float* data() const;
    float item() const;                 // requires size() == 1
    float at(std::initializer_list<int> idx) const;

    Tensor& set_requires_grad(bool on = true);
    bool requires_grad() const;
    // True when gradients flow through this tensor (leaf or tape product).
    bool grad_enabled() const;

    float* grad_data();
    const float* grad_data() const;     // nullptr when no grad buffer
    Tensor grad() const;                // copy of the gradient as a tensor
    void zero_grad();

    Tensor detach() const;              // same values, no gradient flow
    Tensor clone() const;               // deep copy of values

private:
    struct Storage {
        std::vector<float> v;
        std::vector<float> g;           // empty until needed
        bool requires_grad = false;     // user-marked leaf
        bool tape_product = false;      // produced by a recorded op
    };
    std::shared_ptr<Storage> st_;
    Shape shape_;

    friend class Tape;
    friend struct OpAccess;
};

// Eager Wengert list. Constructing a Tape makes it the active tape for the
// current thread; ops executed while it is active append adjoint closures.
// backward() replays them in reverse, then the tape is spent.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    // Seeds d(loss)/d(loss) = 1 and accumulates into every reachable grad.
    void backward(const Tensor& loss);

    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
    size_t num_nodes() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
    bool used_ = false;
};

// ---- construction helpers -------------------------------------------------

Tensor rand_uniform(Rng& rng, Shape shape, double lo = 0.0, double hi = 1.0);
Tensor rand_normal(Rng& rng, Shape shape, double mean = 0.0, double stddev = 1.0);
Tensor identity_matrix(int n);

// ---- elementwise binary (numpy-style broadcasting) ------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, float b);
Tensor sub(const Tensor& a, float b);
Tensor sub(float a, const Tensor& b);
Tensor mul(const Tensor& a, float b);
Tensor div(const Tensor& a, float b);
Tensor div(float a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, float b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, float b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, float b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, float b) { return div(a, b); }
inline Tensor operator+(float a, const Tensor& b) { return add(b, a); }
inline Tensor operator-(float a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(float a, const Tensor& b) { return mul(b, a); }
inline Tensor operator/(float a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return mul(a, -1.0f); }

// ---- elementwise unary -----------------------------------------------------

Tensor abs(const Tensor& t);            // d/dx at 0 taken as 0
Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
Tensor sqrt(const Tensor& t);
Tensor sin(const Tensor& t);
Tensor cos(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor softplus(const Tensor& t);       // log(1 + e^x), overflow-safe
Tensor square(const Tensor& t);
// Gradient passes where lo <= x <= hi, zero outside.
Tensor clamp(const Tensor& t, float lo, float hi);
Tensor clamp_min(const Tensor& t, float lo);

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);    // [m,k]x[k,n]
Tensor transpose(const Tensor& t);                  // rank-2

// ---- structure ---------------------------------------------------------------

Tensor reshape(const Tensor& t, Shape shape);
// Flattens every part and concatenates; gradient routes back by offset.
Tensor concat_flat(const std::vector<Tensor>& parts);
Tensor concat_lastdim(const Tensor& a, const Tensor& b);
Tensor narrow_lastdim(const Tensor& t, int start, int len);

// Per-row gather/scatter on rank-2 tensors; idx is row-major [n*k].
Tensor gather_cols(const Tensor& t, const std::vector<int>& idx, int k);
Tensor scatter_cols(const Tensor& t, const std::vector<int>& idx, int ncols);

// ---- reductions (float64 accumulation) ---------------------------------------

Tensor sum(const Tensor& t);            // rank-0
Tensor mean(const Tensor& t);           // rank-0
Tensor mean_lastdim(const Tensor& t);   // keeps a size-1 last dim
Tensor softmax_lastdim(const Tensor& t);
// Weighted mean sum(t*mask)/sum(mask); mask is treated as a constant.
// Returns 0 when the mask is empty (flag reported via *empty_mask).
Tensor masked_mean(const Tensor& t, const Tensor& mask, bool* empty_mask = nullptr);

// ---- constant (non-differentiable) helpers ------------------------------------

Tensor ge_mask(const Tensor& t, float v);   // 1 where t >= v
Tensor gt_mask(const Tensor& t, float v);
bool all_finite(const Tensor& t);
bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Hooks for modules that implement their own primitives (custom forward +
// recorded adjoint); not part of the public surface.
namespace detail {
bool grad_flows(const Tensor& t);
// Flags t as a differentiable tape product and allocates its grad buffer.
void mark_tape_product(Tensor& t);
// Grad accumulator of t, allocating it if needed.
float* grad_accum(const Tensor& t);
} // namespace detail

} // namespace endogede
