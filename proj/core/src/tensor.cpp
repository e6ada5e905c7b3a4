#include "endogede/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <utility>

namespace endogede {

long long shape_size(const Shape& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

// ---- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
    for (int d : shape_)
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_str(shape_));
    st_ = std::make_shared<Storage>();
    st_->v.assign(static_cast<size_t>(shape_size(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)) {
    if (static_cast<long long>(values.size()) != shape_size(shape_))
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape_));
    st_ = std::make_shared<Storage>();
    st_->v = std::move(values);
}

Tensor Tensor::scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }

long long Tensor::size() const { return st_ ? static_cast<long long>(st_->v.size()) : 0; }

float* Tensor::data() { return st_->v.data(); }
const float* Tensor::data() const { return st_->v.data(); }

float Tensor::item() const {
    if (!st_ || st_->v.size() != 1)
        throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape_));
    return st_->v[0];
}

float Tensor::at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw ShapeError("index rank mismatch");
    long long off = 0;
    int i = 0;
    for (int v : idx) {
        off = off * shape_[static_cast<size_t>(i)] + v;
        ++i;
    }
    return st_->v[static_cast<size_t>(off)];
}

Tensor& Tensor::set_requires_grad(bool on) {
    st_->requires_grad = on;
    if (on && st_->g.empty()) st_->g.assign(st_->v.size(), 0.0f);
    return *this;
}

bool Tensor::requires_grad() const { return st_ && st_->requires_grad; }
bool Tensor::grad_enabled() const { return st_ && (st_->requires_grad || st_->tape_product); }

float* Tensor::grad_data() {
    if (st_->g.empty()) st_->g.assign(st_->v.size(), 0.0f);
    return st_->g.data();
}

const float* Tensor::grad_data() const {
    return st_ && !st_->g.empty() ? st_->g.data() : nullptr;
}

Tensor Tensor::grad() const {
    Tensor g(shape_, 0.0f);
    if (st_ && !st_->g.empty()) g.st_->v = st_->g;
    return g;
}

void Tensor::zero_grad() {
    if (st_ && !st_->g.empty()) std::fill(st_->g.begin(), st_->g.end(), 0.0f);
}

Tensor Tensor::detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.st_ = std::make_shared<Storage>();
    t.st_->v = st_->v;
    return t;
}

Tensor Tensor::clone() const { return detach(); }

// ---- Tape --------------------------------------------------------------------

namespace {
thread_local std::vector<Tape*> g_tape_stack;
} // namespace

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
    if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

// Internal accessor so op implementations can reach Tensor storage.
struct OpAccess {
    static std::shared_ptr<Tensor::Storage>& st(Tensor& t) { return t.st_; }
    static const std::shared_ptr<Tensor::Storage>& st(const Tensor& t) { return t.st_; }
    static void mark_product(Tensor& t) {
        t.st_->tape_product = true;
        if (t.st_->g.empty()) t.st_->g.assign(t.st_->v.size(), 0.0f);
    }
    static void ensure_grad(const Tensor& t) {
        if (t.st_->g.empty()) t.st_->g.assign(t.st_->v.size(), 0.0f);
    }
};

void Tape::backward(const Tensor& loss) {
    if (used_) throw Error("tape already consumed by backward()");
    if (loss.size() != 1)
        throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    if (!loss.grad_enabled())
        throw ValueError("loss does not depend on any differentiable input");
    used_ = true;
    OpAccess::ensure_grad(loss);
    OpAccess::st(loss)->g[0] += 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
}

// ---- recording helpers ---------------------------------------------------------

namespace {

bool flows(const Tensor& t) { return t.grad_enabled(); }

// Returns the active tape when any input participates in differentiation.
template <class... Ts>
Tape* recording_tape(const Ts&... ins) {
    Tape* tp = Tape::active();
    if (!tp) return nullptr;
    bool any = (flows(ins) || ...);
    return any ? tp : nullptr;
}

void prepare(Tape* /*tp*/, Tensor& out) { OpAccess::mark_product(out); }

float* grad_of(const Tensor& t) {
    OpAccess::ensure_grad(t);
    return OpAccess::st(t)->g.data();
}

// ---- broadcasting machinery ---

struct BcastPlan {
    Shape out_shape;
    std::vector<long long> stride_a, stride_b; // per out dim; 0 on broadcast dims
};

BcastPlan make_bcast(const Shape& a, const Shape& b) {
    BcastPlan p;
    int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
    int r = std::max(ra, rb);
    p.out_shape.resize(static_cast<size_t>(r));
    std::vector<long long> full_sa(static_cast<size_t>(r)), full_sb(static_cast<size_t>(r));
    // row-major strides with left-padding of size-1 dims
    long long sa = 1, sb = 1;
    std::vector<long long> strides_a(static_cast<size_t>(ra)), strides_b(static_cast<size_t>(rb));
    for (int i = ra - 1; i >= 0; --i) { strides_a[static_cast<size_t>(i)] = sa; sa *= a[static_cast<size_t>(i)]; }
    for (int i = rb - 1; i >= 0; --i) { strides_b[static_cast<size_t>(i)] = sb; sb *= b[static_cast<size_t>(i)]; }
    for (int i = 0; i < r; ++i) {
        int da = i - (r - ra), db = i - (r - rb);
        int na = da >= 0 ? a[static_cast<size_t>(da)] : 1;
        int nb = db >= 0 ? b[static_cast<size_t>(db)] : 1;
        if (na != nb && na != 1 && nb != 1)
            throw ShapeError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
        p.out_shape[static_cast<size_t>(i)] = std::max(na, nb);
        full_sa[static_cast<size_t>(i)] = (da >= 0 && na != 1) ? strides_a[static_cast<size_t>(da)] : 0;
        full_sb[static_cast<size_t>(i)] = (db >= 0 && nb != 1) ? strides_b[static_cast<size_t>(db)] : 0;
    }
    p.stride_a = std::move(full_sa);
    p.stride_b = std::move(full_sb);
    return p;
}

// Iterates the broadcast index space calling fn(out_idx, a_off, b_off).
template <class Fn>
void bcast_for_each(const BcastPlan& p, Fn&& fn) {
    long long n = shape_size(p.out_shape);
    int r = static_cast<int>(p.out_shape.size());
    if (r == 0) { fn(0, 0, 0); return; }
    std::vector<int> ix(static_cast<size_t>(r), 0);
    long long oa = 0, ob = 0;
    for (long long i = 0; i < n; ++i) {
        fn(i, oa, ob);
        for (int d = r - 1; d >= 0; --d) {
            auto ud = static_cast<size_t>(d);
            if (++ix[ud] < p.out_shape[ud]) {
                oa += p.stride_a[ud];
                ob += p.stride_b[ud];
                break;
            }
            ix[ud] = 0;
            oa -= p.stride_a[ud] * (p.out_shape[ud] - 1);
            ob -= p.stride_b[ud] * (p.out_shape[ud] - 1);
        }
    }
}

// Generic broadcast binary op. DPair(a, b) -> {dout/da, dout/db}.
template <class F, class D>
Tensor binary_op(const Tensor& a, const Tensor& b, F f, D dpair) {
    BcastPlan plan = make_bcast(a.shape(), b.shape());
    Tensor out(plan.out_shape);
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    bcast_for_each(plan, [&](long long i, long long oa, long long ob) {
        po[i] = f(pa[oa], pb[ob]);
    });
    if (Tape* tp = recording_tape(a, b)) {
        prepare(tp, out);
        bool na = flows(a), nb = flows(b);
        Tensor ac = a, bc = b, oc = out;
        tp->record([plan, ac, bc, oc, na, nb, dpair]() {
            const float* go = oc.grad_data();
            const float* pa2 = ac.data();
            const float* pb2 = bc.data();
            float* ga = na ? grad_of(ac) : nullptr;
            float* gb = nb ? grad_of(bc) : nullptr;
            bcast_for_each(plan, [&](long long i, long long oa, long long ob) {
                auto [da, db] = dpair(pa2[oa], pb2[ob]);
                if (ga) ga[oa] += da * go[i];
                if (gb) gb[ob] += db * go[i];
            });
        });
    }
    return out;
}

// Generic unary op. d(x, fx) -> dout/dx.
template <class F, class D>
Tensor unary_op(const Tensor& t, F f, D d) {
    Tensor out(t.shape());
    const float* pi = t.data();
    float* po = out.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i) po[i] = f(pi[i]);
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc, d]() {
            const float* go = oc.grad_data();
            const float* x = tc.data();
            const float* fx = oc.data();
            float* g = grad_of(tc);
            long long m = tc.size();
            for (long long i = 0; i < m; ++i) g[i] += d(x[i], fx[i]) * go[i];
        });
    }
    return out;
}

} // namespace

// ---- construction helpers -------------------------------------------------------

Tensor rand_uniform(Rng& rng, Shape shape, double lo, double hi) {
    Tensor t(std::move(shape));
    float* p = t.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i) p[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

Tensor rand_normal(Rng& rng, Shape shape, double mean, double stddev) {
    Tensor t(std::move(shape));
    float* p = t.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i) p[i] = static_cast<float>(rng.normal(mean, stddev));
    return t;
}

Tensor identity_matrix(int n) {
    Tensor t(Shape{n, n});
    for (int i = 0; i < n; ++i) t.data()[i * n + i] = 1.0f;
    return t;
}

// ---- binary ops -------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](float x, float y) { return x + y; },
                     [](float, float) { return std::pair<float, float>{1.0f, 1.0f}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](float x, float y) { return x - y; },
                     [](float, float) { return std::pair<float, float>{1.0f, -1.0f}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](float x, float y) { return x * y; },
                     [](float x, float y) { return std::pair<float, float>{y, x}; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, [](float x, float y) { return x / y; },
                     [](float x, float y) {
                         float inv = 1.0f / y;
                         return std::pair<float, float>{inv, -x * inv * inv};
                     });
}

Tensor add(const Tensor& a, float b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, float b) { return sub(a, Tensor::scalar(b)); }
Tensor sub(float a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor mul(const Tensor& a, float b) { return mul(a, Tensor::scalar(b)); }
Tensor div(const Tensor& a, float b) { return div(a, Tensor::scalar(b)); }
Tensor div(float a, const Tensor& b) { return div(Tensor::scalar(a), b); }

// ---- unary ops ---------------------------------------------------------------------

Tensor abs(const Tensor& t) {
    return unary_op(t, [](float x) { return std::fabs(x); },
                    [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Tensor exp(const Tensor& t) {
    return unary_op(t, [](float x) { return std::exp(x); },
                    [](float, float fx) { return fx; });
}

Tensor log(const Tensor& t) {
    return unary_op(t, [](float x) { return std::log(x); },
                    [](float x, float) { return 1.0f / x; });
}

Tensor sqrt(const Tensor& t) {
    return unary_op(t, [](float x) { return std::sqrt(x); },
                    [](float, float fx) { return fx > 0.0f ? 0.5f / fx : 0.0f; });
}

Tensor sin(const Tensor& t) {
    return unary_op(t, [](float x) { return std::sin(x); },
                    [](float x, float) { return std::cos(x); });
}

Tensor cos(const Tensor& t) {
    return unary_op(t, [](float x) { return std::cos(x); },
                    [](float x, float) { return -std::sin(x); });
}

Tensor tanh(const Tensor& t) {
    return unary_op(t, [](float x) { return std::tanh(x); },
                    [](float, float fx) { return 1.0f - fx * fx; });
}

Tensor sigmoid(const Tensor& t) {
    return unary_op(t,
                    [](float x) { return x >= 0.0f ? 1.0f / (1.0f + std::exp(-x))
                                                   : std::exp(x) / (1.0f + std::exp(x)); },
                    [](float, float fx) { return fx * (1.0f - fx); });
}

Tensor softplus(const Tensor& t) {
    return unary_op(t,
                    [](float x) { return x > 20.0f ? x : std::log1p(std::exp(x)); },
                    [](float x, float) { return x >= 0.0f ? 1.0f / (1.0f + std::exp(-x))
                                                          : std::exp(x) / (1.0f + std::exp(x)); });
}

Tensor square(const Tensor& t) {
    return unary_op(t, [](float x) { return x * x; },
                    [](float x, float) { return 2.0f * x; });
}

Tensor clamp(const Tensor& t, float lo, float hi) {
    return unary_op(t,
                    [lo, hi](float x) { return x < lo ? lo : (x > hi ? hi : x); },
                    [lo, hi](float x, float) { return (x >= lo && x <= hi) ? 1.0f : 0.0f; });
}

Tensor clamp_min(const Tensor& t, float lo) {
    return unary_op(t, [lo](float x) { return x < lo ? lo : x; },
                    [lo](float x, float) { return x >= lo ? 1.0f : 0.0f; });
}

// ---- linear algebra ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul requires rank-2 tensors, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul inner dimensions disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    Tensor out(Shape{m, n});
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += static_cast<double>(pa[i * k + p]) * static_cast<double>(pb[p * n + j]);
            po[i * n + j] = static_cast<float>(acc);
        }
    }
    if (Tape* tp = recording_tape(a, b)) {
        prepare(tp, out);
        bool na = flows(a), nb = flows(b);
        Tensor ac = a, bc = b, oc = out;
        tp->record([ac, bc, oc, na, nb, m, k, n]() {
            const float* go = oc.grad_data();
            const float* pa2 = ac.data();
            const float* pb2 = bc.data();
            if (na) {
                float* ga = grad_of(ac);
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j)
                            acc += static_cast<double>(go[i * n + j]) * pb2[p * n + j];
                        ga[i * k + p] += static_cast<float>(acc);
                    }
            }
            if (nb) {
                float* gb = grad_of(bc);
                for (int p = 0; p < k; ++p)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i)
                            acc += static_cast<double>(pa2[i * k + p]) * go[i * n + j];
                        gb[p * n + j] += static_cast<float>(acc);
                    }
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("transpose requires rank-2, got " + shape_str(t.shape()));
    int m = t.dim(0), n = t.dim(1);
    Tensor out(Shape{n, m});
    const float* pi = t.data();
    float* po = out.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) po[j * m + i] = pi[i * n + j];
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc, m, n]() {
            const float* go = oc.grad_data();
            float* g = grad_of(tc);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) g[i * n + j] += go[j * m + i];
        });
    }
    return out;
}

// ---- structure ---------------------------------------------------------------------------

Tensor reshape(const Tensor& t, Shape shape) {
    if (shape_size(shape) != t.size())
        throw ShapeError("reshape from " + shape_str(t.shape()) + " to " + shape_str(shape) +
                         " changes element count");
    Tensor out(shape, std::vector<float>(t.data(), t.data() + t.size()));
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc]() {
            const float* go = oc.grad_data();
            float* g = grad_of(tc);
            long long n = tc.size();
            for (long long i = 0; i < n; ++i) g[i] += go[i];
        });
    }
    return out;
}

Tensor concat_flat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_flat of zero tensors");
    long long total = 0;
    for (const Tensor& p : parts) total += p.size();
    Tensor out(Shape{static_cast<int>(total)});
    float* po = out.data();
    long long off = 0;
    for (const Tensor& p : parts) {
        std::memcpy(po + off, p.data(), static_cast<size_t>(p.size()) * sizeof(float));
        off += p.size();
    }
    bool any = false;
    for (const Tensor& p : parts) any = any || flows(p);
    Tape* tp = Tape::active();
    if (tp && any) {
        prepare(tp, out);
        std::vector<Tensor> pc = parts;
        Tensor oc = out;
        tp->record([pc, oc]() {
            const float* go = oc.grad_data();
            long long o = 0;
            for (const Tensor& p : pc) {
                if (flows(p)) {
                    float* g = grad_of(p);
                    long long n = p.size();
                    for (long long i = 0; i < n; ++i) g[i] += go[o + i];
                }
                o += p.size();
            }
        });
    }
    return out;
}

Tensor concat_lastdim(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1)
        throw ShapeError("concat_lastdim rank mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    for (int i = 0; i + 1 < a.rank(); ++i)
        if (a.dim(i) != b.dim(i))
            throw ShapeError("concat_lastdim leading dims differ: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    int ca = a.dim(a.rank() - 1), cb = b.dim(b.rank() - 1);
    Shape os = a.shape();
    os.back() = ca + cb;
    Tensor out(os);
    long long rows = a.size() / ca;
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (long long r = 0; r < rows; ++r) {
        std::memcpy(po + r * (ca + cb), pa + r * ca, static_cast<size_t>(ca) * sizeof(float));
        std::memcpy(po + r * (ca + cb) + ca, pb + r * cb, static_cast<size_t>(cb) * sizeof(float));
    }
    if (Tape* tp = recording_tape(a, b)) {
        prepare(tp, out);
        bool na = flows(a), nb = flows(b);
        Tensor ac = a, bc = b, oc = out;
        tp->record([ac, bc, oc, na, nb, ca, cb, rows]() {
            const float* go = oc.grad_data();
            if (na) {
                float* g = grad_of(ac);
                for (long long r = 0; r < rows; ++r)
                    for (int c = 0; c < ca; ++c) g[r * ca + c] += go[r * (ca + cb) + c];
            }
            if (nb) {
                float* g = grad_of(bc);
                for (long long r = 0; r < rows; ++r)
                    for (int c = 0; c < cb; ++c) g[r * cb + c] += go[r * (ca + cb) + ca + c];
            }
        });
    }
    return out;
}

Tensor narrow_lastdim(const Tensor& t, int start, int len) {
    if (t.rank() < 1) throw ShapeError("narrow_lastdim on rank-0");
    int c = t.dim(t.rank() - 1);
    if (start < 0 || len <= 0 || start + len > c)
        throw ShapeError("narrow_lastdim [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of range for " + shape_str(t.shape()));
    Shape os = t.shape();
    os.back() = len;
    Tensor out(os);
    long long rows = t.size() / c;
    const float* pi = t.data();
    float* po = out.data();
    for (long long r = 0; r < rows; ++r)
        std::memcpy(po + r * len, pi + r * c + start, static_cast<size_t>(len) * sizeof(float));
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc, start, len, c, rows]() {
            const float* go = oc.grad_data();
            float* g = grad_of(tc);
            for (long long r = 0; r < rows; ++r)
                for (int j = 0; j < len; ++j) g[r * c + start + j] += go[r * len + j];
        });
    }
    return out;
}

Tensor gather_cols(const Tensor& t, const std::vector<int>& idx, int k) {
    if (t.rank() != 2) throw ShapeError("gather_cols requires rank-2, got " + shape_str(t.shape()));
    int n = t.dim(0), e = t.dim(1);
    if (static_cast<int>(idx.size()) != n * k) throw ShapeError("gather_cols index count mismatch");
    Tensor out(Shape{n, k});
    const float* pi = t.data();
    float* po = out.data();
    for (int r = 0; r < n; ++r)
        for (int j = 0; j < k; ++j) {
            int col = idx[static_cast<size_t>(r * k + j)];
            if (col < 0 || col >= e) throw ShapeError("gather_cols index out of range");
            po[r * k + j] = pi[r * e + col];
        }
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        std::vector<int> ic = idx;
        tp->record([tc, oc, ic, n, k, e]() {
            const float* go = oc.grad_data();
            float* g = grad_of(tc);
            for (int r = 0; r < n; ++r)
                for (int j = 0; j < k; ++j)
                    g[r * e + ic[static_cast<size_t>(r * k + j)]] += go[r * k + j];
        });
    }
    return out;
}

Tensor scatter_cols(const Tensor& t, const std::vector<int>& idx, int ncols) {
    if (t.rank() != 2) throw ShapeError("scatter_cols requires rank-2, got " + shape_str(t.shape()));
    int n = t.dim(0), k = t.dim(1);
    if (static_cast<int>(idx.size()) != n * k) throw ShapeError("scatter_cols index count mismatch");
    Tensor out(Shape{n, ncols});
    const float* pi = t.data();
    float* po = out.data();
    for (int r = 0; r < n; ++r)
        for (int j = 0; j < k; ++j) {
            int col = idx[static_cast<size_t>(r * k + j)];
            if (col < 0 || col >= ncols) throw ShapeError("scatter_cols index out of range");
            po[r * ncols + col] += pi[r * k + j];
        }
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        std::vector<int> ic = idx;
        tp->record([tc, oc, ic, n, k, ncols]() {
            const float* go = oc.grad_data();
            float* g = grad_of(tc);
            for (int r = 0; r < n; ++r)
                for (int j = 0; j < k; ++j)
                    g[r * k + j] += go[r * ncols + ic[static_cast<size_t>(r * k + j)]];
        });
    }
    return out;
}

// ---- reductions -----------------------------------------------------------------------------

Tensor sum(const Tensor& t) {
    double acc = 0.0;
    const float* p = t.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i) acc += p[i];
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc]() {
            float go = oc.grad_data()[0];
            float* g = grad_of(tc);
            long long m = tc.size();
            for (long long i = 0; i < m; ++i) g[i] += go;
        });
    }
    return out;
}

Tensor mean(const Tensor& t) {
    double acc = 0.0;
    const float* p = t.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i) acc += p[i];
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc, n]() {
            float go = oc.grad_data()[0] / static_cast<float>(n);
            float* g = grad_of(tc);
            for (long long i = 0; i < n; ++i) g[i] += go;
        });
    }
    return out;
}

Tensor mean_lastdim(const Tensor& t) {
    if (t.rank() < 1) throw ShapeError("mean_lastdim on rank-0");
    int c = t.dim(t.rank() - 1);
    Shape os = t.shape();
    os.back() = 1;
    Tensor out(os);
    long long rows = t.size() / c;
    const float* pi = t.data();
    float* po = out.data();
    for (long long r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j) acc += pi[r * c + j];
        po[r] = static_cast<float>(acc / c);
    }
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc, c, rows]() {
            const float* go = oc.grad_data();
            float* g = grad_of(tc);
            for (long long r = 0; r < rows; ++r) {
                float gr = go[r] / static_cast<float>(c);
                for (int j = 0; j < c; ++j) g[r * c + j] += gr;
            }
        });
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& t) {
    if (t.rank() < 1) throw ShapeError("softmax_lastdim on rank-0");
    int c = t.dim(t.rank() - 1);
    Tensor out(t.shape());
    long long rows = t.size() / c;
    const float* pi = t.data();
    float* po = out.data();
    for (long long r = 0; r < rows; ++r) {
        float mx = pi[r * c];
        for (int j = 1; j < c; ++j) mx = std::max(mx, pi[r * c + j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(static_cast<double>(pi[r * c + j] - mx));
        for (int j = 0; j < c; ++j)
            po[r * c + j] = static_cast<float>(std::exp(static_cast<double>(pi[r * c + j] - mx)) / z);
    }
    if (Tape* tp = recording_tape(t)) {
        prepare(tp, out);
        Tensor tc = t, oc = out;
        tp->record([tc, oc, c, rows]() {
            const float* go = oc.grad_data();
            const float* s = oc.data();
            float* g = grad_of(tc);
            for (long long r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += static_cast<double>(go[r * c + j]) * s[r * c + j];
                for (int j = 0; j < c; ++j)
                    g[r * c + j] += s[r * c + j] * (go[r * c + j] - static_cast<float>(dot));
            }
        });
    }
    return out;
}

Tensor masked_mean(const Tensor& t, const Tensor& mask, bool* empty_mask) {
    if (t.shape() != mask.shape())
        throw ShapeError("masked_mean shape mismatch: " + shape_str(t.shape()) + " vs " +
                         shape_str(mask.shape()));
    const float* pv = t.data();
    const float* pm = mask.data();
    long long n = t.size();
    double num = 0.0, den = 0.0;
    for (long long i = 0; i < n; ++i) {
        num += static_cast<double>(pv[i]) * pm[i];
        den += pm[i];
    }
    if (empty_mask) *empty_mask = (den == 0.0);
    if (den == 0.0) return Tensor::scalar(0.0f);
    Tensor out = Tensor::scalar(static_cast<float>(num / den));
    if (Tape* tp = recording_tape(t)) {  // mask is a constant by contract
        prepare(tp, out);
        Tensor tc = t, mc = mask, oc = out;
        tp->record([tc, mc, oc, den]() {
            float go = oc.grad_data()[0];
            const float* m = mc.data();
            float* g = grad_of(tc);
            long long nn = tc.size();
            for (long long i = 0; i < nn; ++i)
                g[i] += go * m[i] / static_cast<float>(den);
        });
    }
    return out;
}

// ---- constant helpers --------------------------------------------------------------------------

Tensor ge_mask(const Tensor& t, float v) {
    Tensor out(t.shape());
    const float* pi = t.data();
    float* po = out.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i) po[i] = pi[i] >= v ? 1.0f : 0.0f;
    return out;
}

Tensor gt_mask(const Tensor& t, float v) {
    Tensor out(t.shape());
    const float* pi = t.data();
    float* po = out.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i) po[i] = pi[i] > v ? 1.0f : 0.0f;
    return out;
}

bool all_finite(const Tensor& t) {
    const float* p = t.data();
    long long n = t.size();
    for (long long i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * sizeof(float)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("max_abs_diff shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const float* pa = a.data();
    const float* pb = b.data();
    double m = 0.0;
    long long n = a.size();
    for (long long i = 0; i < n; ++i)
        m = std::max(m, std::fabs(static_cast<double>(pa[i]) - pb[i]));
    return m;
}

namespace detail {

bool grad_flows(const Tensor& t) { return t.grad_enabled(); }

void mark_tape_product(Tensor& t) { OpAccess::mark_product(t); }

float* grad_accum(const Tensor& t) {
    OpAccess::ensure_grad(t);
    return OpAccess::st(t)->g.data();
}

} // namespace detail

} // namespace endogede
