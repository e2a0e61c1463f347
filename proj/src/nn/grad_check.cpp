#include "sparsect/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sparsect::nn {
namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor<double>>& inputs) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    return f(vars).value().item();
}

}  // namespace

double grad_check(const ScalarFn& f, const std::vector<Tensor<double>>& inputs, const GradCheckOptions& opts) {
    std::vector<Tensor<double>> analytic;
    {
        Tape<double> tape;
        std::vector<Var<double>> vars;
        for (const auto& t : inputs) vars.push_back(tape.variable(t));
        Var<double> loss = f(vars);
        tape.backward(loss);
        for (const auto& v : vars) analytic.push_back(tape.gradient(v));
    }

    // Errors are measured against the largest gradient component over all
    // inputs. Per-input scaling is meaningless for inputs whose true gradient
    // is zero, e.g. a bias feeding straight into a normalization.
    double scale = 1e-12;
    for (const auto& g : analytic)
        for (double v : g.values()) scale = std::max(scale, std::abs(v));

    std::mt19937_64 rng(opts.seed);
    std::vector<Tensor<double>> probe = inputs;
    double err = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        std::vector<std::size_t> coords(inputs[k].size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opts.max_samples_per_input && coords.size() > opts.max_samples_per_input) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.max_samples_per_input);
        }
        for (std::size_t i : coords) {
            const double orig = probe[k][i];
            probe[k][i] = orig + opts.h;
            const double up = evaluate(f, probe);
            probe[k][i] = orig - opts.h;
            const double down = evaluate(f, probe);
            probe[k][i] = orig;
            const double numeric = (up - down) / (2.0 * opts.h);
            scale = std::max(scale, std::abs(numeric));
            err = std::max(err, std::abs(numeric - analytic[k][i]));
        }
    }
    const double worst = err / scale;
    return worst;
}

}  // namespace sparsect::nn
