#include "d2c/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "d2c/numcore/errors.hpp"

namespace d2c {
namespace {

double evaluate(const std::function<Var()>& f) {
    NoGradGuard guard;
    const double v = f().item();
    if (!std::isfinite(v)) throw EvaluationError("gradient check: objective is not finite");
    return v;
}

} // namespace

GradCheckResult grad_check(const std::function<Var()>& f, ParameterSet& params,
                           const GradCheckOptions& options) {
    if (!(options.eps >= 1e-7 && options.eps <= 1e-4)) {
        throw ParameterError("gradient check eps must lie in [1e-7, 1e-4]");
    }
    if (options.corrupt_param && !params.contains(*options.corrupt_param)) {
        throw LookupError("cannot corrupt unknown parameter '" + *options.corrupt_param + "'");
    }

    params.zero_grad();
    {
        Var out = f();
        if (!std::isfinite(out.item())) {
            throw EvaluationError("gradient check: objective is not finite");
        }
        out.backward();
    }

    GradCheckResult result;
    for (auto& p : params) {
        Tensor& t = p.tensor();
        std::vector<double> analytic(t.grad().begin(), t.grad().end());
        if (options.corrupt_param && *options.corrupt_param == p.name() && !analytic.empty()) {
            auto it = std::max_element(analytic.begin(), analytic.end(),
                                       [](double a, double b) { return std::abs(a) < std::abs(b); });
            *it *= 2.0;
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t[i];
            t[i] = saved + options.eps;
            const double plus = evaluate(f);
            t[i] = saved - options.eps;
            const double minus = evaluate(f);
            t[i] = saved;
            const double numeric = (plus - minus) / (2.0 * options.eps);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
            const double err = std::abs(analytic[i] - numeric) / denom;
            ++result.entries_checked;
            if (result.entries_checked == 1 || err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst = GradCheckEntry{p.name(), i, analytic[i], numeric, err};
            }
        }
    }
    params.zero_grad();
    return result;
}

} // namespace d2c
