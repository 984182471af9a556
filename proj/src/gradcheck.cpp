#include <algorithm>
#include <cmath>

#include "kgap/optim.hpp"

namespace kgap::ad {

namespace {

double evaluate(const LossFn& loss, ParameterSet<double>& params) {
    Tape<double> tape;
    return loss(tape, params).value().item();
}

}  // namespace

GradCheckReport grad_check(const LossFn& loss, ParameterSet<double>& params, const GradCheckOptions& options) {
    params.zero_grad();
    {
        Tape<double> tape;
        auto out = loss(tape, params);
        tape.backward(out);
    }
    if (options.corrupt_analytic) options.corrupt_analytic(params);

    GradCheckReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double saved = p.value[k];
            p.value[k] = saved + options.eps;
            double up = evaluate(loss, params);
            p.value[k] = saved - options.eps;
            double down = evaluate(loss, params);
            p.value[k] = saved;

            double numeric = (up - down) / (2.0 * options.eps);
            double analytic = p.grad[k];
            double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
            double rel = std::abs(analytic - numeric) / denom;
            ++report.checked;
            if (report.worst_param.empty() || rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p.name;
                report.worst_index = k;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace kgap::ad
