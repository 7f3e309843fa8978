#pragma once

// Differentiable tape ops packaged for finite-difference checking. Each case
// draws fresh random inputs (as parameters, so they get perturbed) and
// reduces the op output against a fixed random weighting.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "tocomm/nn/tape.hpp"

namespace tocomm::testing {

struct OpCase {
    std::string name;
    // Fills `params` with inputs named "in/..." and returns the loss builder.
    std::function<std::function<nn::Var(nn::Tape&, nn::ParamStore&)>(nn::ParamStore&, std::mt19937_64&)> setup;
};

inline nn::Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -2.0,
                                double hi = 2.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    nn::Tensor t = nn::Tensor::matrix(r, c);
    for (double& v : t.data()) v = d(rng);
    return t;
}

// Values bounded away from zero so kinks (ReLU) are never straddled by +-h.
inline nn::Tensor random_away_from_zero(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    nn::Tensor t = random_matrix(r, c, rng);
    for (double& v : t.data()) {
        if (std::abs(v) < 1e-3) v = v < 0 ? -0.5 : 0.5;
    }
    return t;
}

inline nn::Var weighted_sum(nn::Tape& tape, nn::Var out, const nn::Tensor& weights) {
    return tape.sum(tape.mul(out, tape.constant(weights)));
}

inline std::vector<OpCase> core_op_cases() {
    using nn::ParamStore;
    using nn::Tape;
    using nn::Tensor;
    using nn::Var;
    using Loss = std::function<Var(Tape&, ParamStore&)>;
    std::vector<OpCase> cases;

    auto unary = [&](std::string name, std::function<Var(Tape&, Var)> op, bool away_from_zero) {
        cases.push_back({name, [op, away_from_zero](ParamStore& p, std::mt19937_64& rng) -> Loss {
                             p.add("in/x", away_from_zero ? random_away_from_zero(3, 4, rng) : random_matrix(3, 4, rng));
                             Tensor w = random_matrix(3, 4, rng);
                             return [op, w](Tape& t, ParamStore& ps) {
                                 return weighted_sum(t, op(t, t.parameter(ps, "in/x")), w);
                             };
                         }});
    };
    unary("relu", [](Tape& t, Var x) { return t.relu(x); }, true);
    unary("softplus", [](Tape& t, Var x) { return t.softplus(x); }, false);
    unary("tanh", [](Tape& t, Var x) { return t.tanh(x); }, false);
    unary("scale", [](Tape& t, Var x) { return t.scale(x, -1.7); }, false);
    unary("add_scalar", [](Tape& t, Var x) { return t.add_scalar(x, 0.3); }, false);
    unary("slice_cols", [](Tape& t, Var x) { return t.concat_cols(std::vector<Var>{t.slice_cols(x, 1, 2), t.slice_cols(x, 0, 2)}); }, false);

    cases.push_back({"row_sum", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/x", random_matrix(3, 5, rng));
                         Tensor w = random_matrix(3, 1, rng);
                         return [w](Tape& t, ParamStore& ps) { return weighted_sum(t, t.row_sum(t.parameter(ps, "in/x")), w); };
                     }});
    cases.push_back({"mean", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/x", random_matrix(4, 3, rng));
                         const double c = std::uniform_real_distribution<double>(-2, 2)(rng);
                         return [c](Tape& t, ParamStore& ps) { return t.scale(t.mean(t.parameter(ps, "in/x")), c); };
                     }});
    cases.push_back({"linear", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/x", random_matrix(4, 6, rng));
                         p.add("in/w", random_matrix(5, 6, rng));
                         p.add("in/b", random_matrix(1, 5, rng).reshaped({5}));
                         Tensor w = random_matrix(4, 5, rng);
                         return [w](Tape& t, ParamStore& ps) {
                             return weighted_sum(t, t.linear(t.parameter(ps, "in/x"), t.parameter(ps, "in/w"), t.parameter(ps, "in/b")), w);
                         };
                     }});
    cases.push_back({"add_mul", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/a", random_matrix(3, 4, rng));
                         p.add("in/b", random_matrix(3, 4, rng));
                         Tensor w = random_matrix(3, 4, rng);
                         return [w](Tape& t, ParamStore& ps) {
                             Var a = t.parameter(ps, "in/a");
                             Var b = t.parameter(ps, "in/b");
                             return weighted_sum(t, t.add(t.mul(a, b), a), w);
                         };
                     }});
    cases.push_back({"mul_rows", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/x", random_matrix(3, 4, rng));
                         p.add("in/c", random_matrix(3, 1, rng));
                         Tensor w = random_matrix(3, 4, rng);
                         return [w](Tape& t, ParamStore& ps) {
                             return weighted_sum(t, t.mul_rows(t.parameter(ps, "in/x"), t.parameter(ps, "in/c")), w);
                         };
                     }});
    cases.push_back({"cross_entropy", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/logits", random_matrix(4, 6, rng, -4, 4));
                         std::vector<std::uint32_t> labels(4);
                         for (auto& l : labels) l = static_cast<std::uint32_t>(rng() % 6);
                         Tensor w = random_matrix(4, 1, rng);
                         return [w, labels](Tape& t, ParamStore& ps) {
                             return weighted_sum(t, t.cross_entropy(t.parameter(ps, "in/logits"), labels), w);
                         };
                     }});
    cases.push_back({"kl_std_normal", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/mu", random_matrix(3, 4, rng));
                         p.add("in/sigma", random_matrix(3, 4, rng, 0.2, 3.0));
                         Tensor w = random_matrix(3, 1, rng);
                         return [w](Tape& t, ParamStore& ps) {
                             return weighted_sum(t, t.kl_std_normal(t.parameter(ps, "in/mu"), t.parameter(ps, "in/sigma")), w);
                         };
                     }});
    cases.push_back({"mlp_composite", [](ParamStore& p, std::mt19937_64& rng) -> Loss {
                         p.add("in/x", random_matrix(3, 5, rng));
                         p.add("in/w0", random_matrix(7, 5, rng, -1, 1));
                         p.add("in/b0", random_matrix(1, 7, rng, -0.1, 0.1).reshaped({7}));
                         p.add("in/w1", random_matrix(4, 7, rng, -1, 1));
                         p.add("in/b1", random_matrix(1, 4, rng).reshaped({4}));
                         std::vector<std::uint32_t> labels{0, 3, 1};
                         return [labels](Tape& t, ParamStore& ps) {
                             Var h = t.linear(t.parameter(ps, "in/x"), t.parameter(ps, "in/w0"), t.parameter(ps, "in/b0"));
                             h = t.tanh(h);
                             Var logits = t.linear(h, t.parameter(ps, "in/w1"), t.parameter(ps, "in/b1"));
                             return t.mean(t.cross_entropy(logits, labels));
                         };
                     }});
    return cases;
}

// Runs `draws` independent random draws of a case; returns the aggregate.
inline GradCheckResult run_op_case(const OpCase& c, std::size_t draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheckResult total;
    for (std::size_t d = 0; d < draws; ++d) {
        nn::ParamStore params;
        auto loss = c.setup(params, rng);
        GradCheckResult r = check_gradients(params, loss, "in/");
        total.checked += r.checked;
        total.failures += r.failures;
        if (r.worst_relative > total.worst_relative) {
            total.worst_relative = r.worst_relative;
            total.worst_name = r.worst_name;
        }
    }
    return total;
}

}  // namespace tocomm::testing
