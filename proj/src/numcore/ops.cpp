#include "d2c/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "d2c/numcore/errors.hpp"

namespace d2c::ops {
namespace {

constexpr double kNormFloor = 1e-12;
constexpr double kProbSumTolerance = 1e-9;

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
}

void require_matrix(const Var& a, const char* op) {
    if (a.value().rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
    }
}

void require_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ParameterError("temperature must be a positive finite number");
    }
}

} // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        auto g = self.value.grad();
        for (std::size_t k = 0; k < 2; ++k) {
            auto pg = parent_grad(self, k);
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        auto g = self.value.grad();
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        auto gb = parent_grad(self, 1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        auto g = self.value.grad();
        auto av = self.parents[0]->value.data();
        auto bv = self.parents[1]->value.data();
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
        auto gb = parent_grad(self, 1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a.value();
    for (double& v : out.data()) v *= c;
    return make_op(std::move(out), {a}, [c](Node& self) {
        auto g = self.value.grad();
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * g[i];
    });
}

Var scale_by(const Var& a, const Var& s) {
    if (s.value().size() != 1) throw ShapeError("scale_by: multiplier must hold one element");
    const double c = s.value()[0];
    Tensor out = a.value();
    for (double& v : out.data()) v *= c;
    return make_op(std::move(out), {a, s}, [](Node& self) {
        auto g = self.value.grad();
        auto av = self.parents[0]->value.data();
        const double c = self.parents[1]->value[0];
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * g[i];
        auto gs = parent_grad(self, 1);
        if (!gs.empty()) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
            gs[0] += acc;
        }
    });
}

Var add_bias(const Var& x, const Var& b) {
    require_matrix(x, "add_bias");
    const std::size_t m = x.value().rows();
    const std::size_t n = x.value().cols();
    if (b.value().size() != n) {
        throw ShapeError("add_bias: bias length " + std::to_string(b.value().size()) +
                         " does not match width " + std::to_string(n));
    }
    Tensor out = x.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) o[r * n + c] += bv[c];
    return make_op(std::move(out), {x, b}, [m, n](Node& self) {
        auto g = self.value.grad();
        auto gx = parent_grad(self, 0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        auto gb = parent_grad(self, 1);
        if (!gb.empty()) {
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
        }
    });
}

namespace {

// c (m×n) += a (m×k) · b (k×n)
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// c (m×n) += a (m×k) · bᵀ, b is (n×k)
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.data() + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[i * n + j] += acc;
        }
    }
}

// c (k×n) += aᵀ · b, a is (m×k), b is (m×n)
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* bi = b.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            double* cp = c.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
        }
    }
}

} // namespace

Var matmul(const Var& a, const Var& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t m = a.value().rows();
    const std::size_t k = a.value().cols();
    const std::size_t n = b.value().cols();
    if (b.value().rows() != k) {
        throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " · " +
                         shape_string(b.shape()));
    }
    Tensor out({m, n});
    gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
    return make_op(std::move(out), {a, b}, [m, k, n](Node& self) {
        auto g = self.value.grad();
        auto ga = parent_grad(self, 0);
        if (!ga.empty()) gemm_nt(g, self.parents[1]->value.data(), ga, m, n, k);
        auto gb = parent_grad(self, 1);
        if (!gb.empty()) gemm_tn(self.parents[0]->value.data(), g, gb, m, k, n);
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    const std::size_t m = a.value().rows();
    const std::size_t k = a.value().cols();
    const std::size_t n = b.value().rows();
    if (b.value().cols() != k) {
        throw ShapeError("matmul_nt: inner dimensions differ " + shape_string(a.shape()) +
                         " · " + shape_string(b.shape()) + "ᵀ");
    }
    Tensor out({m, n});
    gemm_nt(a.value().data(), b.value().data(), out.data(), m, k, n);
    return make_op(std::move(out), {a, b}, [m, k, n](Node& self) {
        auto g = self.value.grad();
        auto ga = parent_grad(self, 0);
        if (!ga.empty()) gemm_nn(g, self.parents[1]->value.data(), ga, m, n, k);
        auto gb = parent_grad(self, 1);
        if (!gb.empty()) gemm_tn(g, self.parents[0]->value.data(), gb, m, n, k);
    });
}

Var transpose(const Var& a) {
    require_matrix(a, "transpose");
    const std::size_t m = a.value().rows();
    const std::size_t n = a.value().cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.value().at(i, j);
    return make_op(std::move(out), {a}, [m, n](Node& self) {
        auto g = self.value.grad();
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < m && !ga.empty(); ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return make_op(std::move(out), {a}, [](Node& self) {
        auto g = self.value.grad();
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    });
}

Var tanh(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data()) v = std::tanh(v);
    return make_op(std::move(out), {a}, [](Node& self) {
        auto g = self.value.grad();
        auto y = self.value.data();
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var gelu(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    return make_op(std::move(out), {a}, [](Node& self) {
        auto g = self.value.grad();
        auto x = self.parents[0]->value.data();
        auto ga = parent_grad(self, 0);
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < ga.size(); ++i) {
            const double cdf = 0.5 * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
            ga[i] += g[i] * (cdf + x[i] * pdf);
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    require_matrix(x, "layer_norm");
    const std::size_t m = x.value().rows();
    const std::size_t n = x.value().cols();
    if (gamma.value().size() != n || beta.value().size() != n) {
        throw ShapeError("layer_norm: affine parameters must have length " + std::to_string(n));
    }
    Tensor out({m, n});
    // Cache normalized rows and inverse std for the backward pass.
    std::vector<double> xhat(m * n);
    std::vector<double> inv_std(m);
    auto xv = x.value().data();
    auto gv = gamma.value().data();
    auto bv = beta.value().data();
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = xv.data() + r * n;
        double mean = 0.0;
        for (std::size_t c = 0; c < n; ++c) mean += row[c];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < n; ++c) {
            xhat[r * n + c] = (row[c] - mean) * inv_std[r];
            out.at(r, c) = gv[c] * xhat[r * n + c] + bv[c];
        }
    }
    return make_op(std::move(out), {x, gamma, beta},
                   [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       auto g = self.value.grad();
                       auto gv = self.parents[1]->value.data();
                       auto gx = parent_grad(self, 0);
                       auto ggamma = parent_grad(self, 1);
                       auto gbeta = parent_grad(self, 2);
                       std::vector<double> dxhat(n);
                       for (std::size_t r = 0; r < m; ++r) {
                           double mean_d = 0.0;
                           double mean_dx = 0.0;
                           for (std::size_t c = 0; c < n; ++c) {
                               const std::size_t i = r * n + c;
                               if (!ggamma.empty()) ggamma[c] += g[i] * xhat[i];
                               if (!gbeta.empty()) gbeta[c] += g[i];
                               dxhat[c] = g[i] * gv[c];
                               mean_d += dxhat[c];
                               mean_dx += dxhat[c] * xhat[i];
                           }
                           if (gx.empty()) continue;
                           mean_d /= static_cast<double>(n);
                           mean_dx /= static_cast<double>(n);
                           for (std::size_t c = 0; c < n; ++c) {
                               const std::size_t i = r * n + c;
                               gx[i] += inv_std[r] * (dxhat[c] - mean_d - xhat[i] * mean_dx);
                           }
                       }
                   });
}

namespace {

void softmax_backward(std::span<const double> y, std::span<const double> g, std::span<double> gx,
                      std::size_t rows, std::size_t cols, double tau) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data() + r * cols;
        const double* gr = g.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += yr[c] * (gr[c] - dot) / tau;
    }
}

} // namespace

Var softmax_rows(const Var& x, double tau, std::span<const unsigned char> allowed) {
    require_matrix(x, "softmax_rows");
    require_tau(tau);
    const std::size_t m = x.value().rows();
    const std::size_t n = x.value().cols();
    if (n == 0) throw ShapeError("softmax over an empty row");
    if (!allowed.empty() && allowed.size() != m * n) {
        throw ShapeError("softmax_rows: mask size does not match scores");
    }
    Tensor out({m, n});
    auto xv = x.value().data();
    auto o = out.data();
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = xv.data() + r * n;
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t c = 0; c < n; ++c) {
            if (!allowed.empty() && !allowed[r * n + c]) continue;
            mx = std::max(mx, row[c] / tau);
            any = true;
        }
        if (!any) throw DegenerateInputError("softmax row with every entry masked");
        double z = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (!allowed.empty() && !allowed[r * n + c]) continue;
            o[r * n + c] = std::exp(row[c] / tau - mx);
            z += o[r * n + c];
        }
        for (std::size_t c = 0; c < n; ++c) o[r * n + c] /= z;
    }
    return make_op(std::move(out), {x}, [m, n, tau](Node& self) {
        auto gx = parent_grad(self, 0);
        if (!gx.empty()) softmax_backward(self.value.data(), self.value.grad(), gx, m, n, tau);
    });
}

Var softmax_temp(const Var& logits, double tau) {
    require_tau(tau);
    const std::size_t n = logits.value().size();
    if (n == 0) throw ShapeError("softmax over empty logits");
    const Shape shape = logits.shape();
    Var row = reshape(logits, {1, n});
    return reshape(softmax_rows(row, tau), shape);
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
    require_matrix(x, "slice_rows");
    const std::size_t n = x.value().cols();
    if (begin > end || end > x.value().rows()) throw ShapeError("slice_rows: range out of bounds");
    auto xv = x.value().data();
    Tensor out({end - begin, n},
               std::vector<double>(xv.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                   xv.begin() + static_cast<std::ptrdiff_t>(end * n)));
    return make_op(std::move(out), {x}, [begin, n](Node& self) {
        auto g = self.value.grad();
        auto gx = parent_grad(self, 0);
        if (gx.empty()) return;
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
    });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
    require_matrix(x, "slice_cols");
    const std::size_t m = x.value().rows();
    const std::size_t n = x.value().cols();
    if (begin > end || end > n) throw ShapeError("slice_cols: range out of bounds");
    const std::size_t w = end - begin;
    Tensor out({m, w});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) out.at(r, c) = x.value().at(r, begin + c);
    return make_op(std::move(out), {x}, [m, n, w, begin](Node& self) {
        auto g = self.value.grad();
        auto gx = parent_grad(self, 0);
        if (gx.empty()) return;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < w; ++c) gx[r * n + begin + c] += g[r * w + c];
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
    const std::size_t n = parts.front().value().cols();
    std::size_t m = 0;
    for (const auto& p : parts) {
        if (p.value().cols() != n) throw ShapeError("concat_rows: width mismatch");
        m += p.value().rows();
    }
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& p : parts) {
        auto v = p.value().data();
        data.insert(data.end(), v.begin(), v.end());
    }
    return make_op(Tensor({m, n}, std::move(data)), parts, [](Node& self) {
        auto g = self.value.grad();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const std::size_t len = self.parents[k]->value.size();
            auto gp = parent_grad(self, k);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
            offset += len;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
    const std::size_t m = parts.front().value().rows();
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.value().rows() != m) throw ShapeError("concat_cols: row count mismatch");
        n += p.value().cols();
    }
    Tensor out({m, n});
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.value().cols();
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < w; ++c) out.at(r, offset + c) = p.value().at(r, c);
        offset += w;
    }
    return make_op(std::move(out), parts, [m, n](Node& self) {
        auto g = self.value.grad();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const std::size_t w = self.parents[k]->value.cols();
            auto gp = parent_grad(self, k);
            if (!gp.empty()) {
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * n + offset + c];
            }
            offset += w;
        }
    });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
    require_matrix(table, "gather_rows");
    const std::size_t v = table.value().rows();
    const std::size_t d = table.value().cols();
    Tensor out({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
            throw LookupError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                              std::to_string(v));
        }
        const auto row = static_cast<std::size_t>(ids[i]);
        for (std::size_t c = 0; c < d; ++c) out.at(i, c) = table.value().at(row, c);
    }
    std::vector<int> idx(ids.begin(), ids.end());
    return make_op(std::move(out), {table}, [d, idx = std::move(idx)](Node& self) {
        auto g = self.value.grad();
        auto gt = parent_grad(self, 0);
        if (gt.empty()) return;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto row = static_cast<std::size_t>(idx[i]);
            for (std::size_t c = 0; c < d; ++c) gt[row * d + c] += g[i * d + c];
        }
    });
}

Var mean_rows(const Var& x) {
    require_matrix(x, "mean_rows");
    const std::size_t m = x.value().rows();
    const std::size_t n = x.value().cols();
    if (m == 0) throw ShapeError("mean over zero rows");
    Tensor out({n});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out[c] += x.value().at(r, c);
    for (double& v : out.data()) v /= static_cast<double>(m);
    return make_op(std::move(out), {x}, [m, n](Node& self) {
        auto g = self.value.grad();
        auto gx = parent_grad(self, 0);
        if (gx.empty()) return;
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += g[c] * inv;
    });
}

Var broadcast_rows(const Var& v, std::size_t n) {
    const std::size_t d = v.value().size();
    Tensor out({n, d});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out.at(r, c) = v.value()[c];
    return make_op(std::move(out), {v}, [n, d](Node& self) {
        auto g = self.value.grad();
        auto gv = parent_grad(self, 0);
        if (gv.empty()) return;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) gv[c] += g[r * d + c];
    });
}

Var sum(const Var& x) {
    double acc = 0.0;
    for (double v : x.value().data()) acc += v;
    return make_op(Tensor::scalar(acc), {x}, [](Node& self) {
        const double g = self.value.grad()[0];
        auto gx = parent_grad(self, 0);
        for (double& v : gx) v += g;
    });
}

Var weighted_sum(const Var& x, const Tensor& w) {
    if (w.size() != x.value().size()) throw ShapeError("weighted_sum: weight size mismatch");
    double acc = 0.0;
    auto xv = x.value().data();
    auto wv = w.data();
    for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * wv[i];
    return make_op(Tensor::scalar(acc), {x}, [w](Node& self) {
        const double g = self.value.grad()[0];
        auto gx = parent_grad(self, 0);
        auto wv = w.data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * wv[i];
    });
}

Var stack(const std::vector<Var>& scalars) {
    std::vector<double> data;
    data.reserve(scalars.size());
    for (const auto& s : scalars) {
        if (s.value().size() != 1) throw ShapeError("stack: inputs must be single elements");
        data.push_back(s.value()[0]);
    }
    return make_op(Tensor::vector(std::move(data)), scalars, [](Node& self) {
        auto g = self.value.grad();
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto gp = parent_grad(self, k);
            if (!gp.empty()) gp[0] += g[k];
        }
    });
}

Var cosine_sim(const Var& a, const Var& b) {
    if (a.value().size() != b.value().size()) {
        throw ShapeError("cosine_sim: length mismatch " + std::to_string(a.value().size()) +
                         " vs " + std::to_string(b.value().size()));
    }
    auto av = a.value().data();
    auto bv = b.value().data();
    double dot = 0.0;
    double na2 = 0.0;
    double nb2 = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        dot += av[i] * bv[i];
        na2 += av[i] * av[i];
        nb2 += bv[i] * bv[i];
    }
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);
    if (!(na > kNormFloor) || !(nb > kNormFloor)) {
        throw DegenerateInputError("cosine similarity of a zero-norm vector");
    }
    const double raw = dot / std::sqrt(na2 * nb2);
    const double cos = std::clamp(raw, -1.0, 1.0);
    return make_op(Tensor::scalar(cos), {a, b}, [na, nb, raw](Node& self) {
        const double g = self.value.grad()[0];
        auto av = self.parents[0]->value.data();
        auto bv = self.parents[1]->value.data();
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i)
            ga[i] += g * (bv[i] / (na * nb) - raw * av[i] / (na * na));
        auto gb = parent_grad(self, 1);
        for (std::size_t i = 0; i < gb.size(); ++i)
            gb[i] += g * (av[i] / (na * nb) - raw * bv[i] / (nb * nb));
    });
}

Var kl_div(const Var& p, const Var& q) {
    auto pv = p.value().data();
    auto qv = q.value().data();
    if (pv.size() != qv.size()) throw ShapeError("kl_div: length mismatch");
    if (pv.empty()) throw ShapeError("kl_div: empty distributions");
    double sp = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] < 0.0 || qv[i] < 0.0) throw ParameterError("kl_div: negative probability");
        sp += pv[i];
        sq += qv[i];
    }
    if (std::abs(sp - 1.0) > kProbSumTolerance || std::abs(sq - 1.0) > kProbSumTolerance) {
        throw ParameterError("kl_div: inputs must each sum to 1");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] == 0.0) continue;
        if (qv[i] == 0.0) {
            throw DivergenceError("kl_div: q is zero where p is positive (index " +
                                  std::to_string(i) + ")");
        }
        acc += pv[i] * std::log(pv[i] / qv[i]);
    }
    // Rounding can leave a tiny negative sum for nearly equal inputs.
    acc = std::max(acc, 0.0);
    return make_op(Tensor::scalar(acc), {p, q}, [](Node& self) {
        const double g = self.value.grad()[0];
        auto pv = self.parents[0]->value.data();
        auto qv = self.parents[1]->value.data();
        auto gp = parent_grad(self, 0);
        for (std::size_t i = 0; i < gp.size(); ++i)
            if (pv[i] > 0.0) gp[i] += g * (std::log(pv[i] / qv[i]) + 1.0);
        auto gq = parent_grad(self, 1);
        for (std::size_t i = 0; i < gq.size(); ++i) gq[i] -= g * pv[i] / qv[i];
    });
}

Var nll_loss(const Var& logits, std::span<const int> targets, std::span<const unsigned char> mask) {
    require_matrix(logits, "nll_loss");
    const std::size_t l = logits.value().rows();
    const std::size_t v = logits.value().cols();
    if (targets.size() != l || mask.size() != l) {
        throw ShapeError("nll_loss: targets and mask must have one entry per logit row");
    }
    std::size_t count = 0;
    for (std::size_t i = 0; i < l; ++i) {
        if (!mask[i]) continue;
        ++count;
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
            throw LookupError("nll_loss: target id " + std::to_string(targets[i]) +
                              " outside vocabulary");
        }
    }
    if (count == 0) throw DegenerateInputError("nll_loss: every position is masked");

    auto x = logits.value().data();
    std::vector<double> probs(l * v, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
        if (!mask[i]) continue;
        const double* row = x.data() + i * v;
        const double mx = *std::max_element(row, row + v);
        double z = 0.0;
        for (std::size_t c = 0; c < v; ++c) z += std::exp(row[c] - mx);
        const double lse = mx + std::log(z);
        total += lse - row[targets[i]];
        for (std::size_t c = 0; c < v; ++c) probs[i * v + c] = std::exp(row[c] - lse);
    }
    const double inv = 1.0 / static_cast<double>(count);
    std::vector<int> tgt(targets.begin(), targets.end());
    std::vector<unsigned char> msk(mask.begin(), mask.end());
    return make_op(Tensor::scalar(total * inv), {logits},
                   [l, v, inv, probs = std::move(probs), tgt = std::move(tgt),
                    msk = std::move(msk)](Node& self) {
                       const double g = self.value.grad()[0] * inv;
                       auto gx = parent_grad(self, 0);
                       if (gx.empty()) return;
                       for (std::size_t i = 0; i < l; ++i) {
                           if (!msk[i]) continue;
                           for (std::size_t c = 0; c < v; ++c) gx[i * v + c] += g * probs[i * v + c];
                           gx[i * v + static_cast<std::size_t>(tgt[i])] -= g;
                       }
                   });
}

} // namespace d2c::ops
