#include "tocomm/data/synthetic.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace tocomm::data {

namespace {

void check_distribution(std::span<const double> p, double tolerance, const std::string& what) {
    if (p.empty()) throw std::invalid_argument(what + ": empty distribution");
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(what + ": negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > tolerance) {
        throw std::invalid_argument(what + ": sums to " + std::to_string(total) + ", not 1");
    }
}

std::vector<double> random_simplex(std::size_t n, nn::Rng& rng, double sharpness) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(n);
    double total = 0.0;
    for (double& v : p) {
        v = std::pow(e(rng), sharpness);
        total += v;
    }
    for (double& v : p) v /= total;
    return p;
}

std::uint32_t draw(std::span<const double> p, nn::Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<std::uint32_t>(i);
    }
    // u landed in the rounding slack above the last partial sum.
    for (std::size_t i = p.size(); i-- > 0;) {
        if (p[i] > 0.0) return static_cast<std::uint32_t>(i);
    }
    return 0;
}

double xlogx_ratio(double pxy, double px, double py) { return pxy > 0.0 ? pxy * std::log(pxy / (px * py)) : 0.0; }

}  // namespace

void DiscreteTask::validate(double tolerance) const {
    if (prior.empty() || prior.size() > kMaxSyntheticClasses) throw std::invalid_argument("synthetic: 1..8 classes");
    if (conditionals.empty() || conditionals.size() > kMaxSyntheticDevices) throw std::invalid_argument("synthetic: 1..3 views");
    check_distribution(prior, tolerance, "synthetic prior");
    for (std::size_t k = 0; k < conditionals.size(); ++k) {
        if (conditionals[k].size() != prior.size()) throw std::invalid_argument("synthetic: one conditional per class");
        const std::size_t a = conditionals[k][0].size();
        if (a == 0 || a > kMaxSyntheticAlphabet) throw std::invalid_argument("synthetic: alphabet must be 1..16");
        for (std::size_t y = 0; y < prior.size(); ++y) {
            if (conditionals[k][y].size() != a) throw std::invalid_argument("synthetic: ragged conditional table");
            check_distribution(conditionals[k][y], tolerance,
                               "synthetic p(x" + std::to_string(k) + "|y=" + std::to_string(y) + ")");
        }
    }
}

DiscreteTask random_discrete_task(std::size_t num_classes, std::span<const std::size_t> alphabets, nn::Rng& rng,
                                  double sharpness) {
    DiscreteTask t;
    t.prior = random_simplex(num_classes, rng, 1.0);
    for (std::size_t a : alphabets) {
        std::vector<std::vector<double>> cond;
        for (std::size_t y = 0; y < num_classes; ++y) cond.push_back(random_simplex(a, rng, sharpness));
        t.conditionals.push_back(std::move(cond));
    }
    t.validate();
    return t;
}

SyntheticDataset synth_discrete(const DiscreteTask& table, std::size_t n, nn::Rng& rng) {
    table.validate();
    const std::size_t kk = table.devices();
    SyntheticDataset out;
    out.table = table;
    out.symbols.assign(kk, std::vector<std::uint32_t>(n));
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = draw(table.prior, rng);
        for (std::size_t k = 0; k < kk; ++k) out.symbols[k][i] = draw(table.conditionals[k][labels[i]], rng);
    }
    std::vector<nn::Tensor> views;
    for (std::size_t k = 0; k < kk; ++k) {
        nn::Tensor v = nn::Tensor::matrix(n, table.alphabet(k));
        for (std::size_t i = 0; i < n; ++i) v.at(i, out.symbols[k][i]) = 1.0;
        views.push_back(std::move(v));
    }
    out.one_hot = MultiViewDataset(std::move(views), std::move(labels), table.num_classes());
    return out;
}

void for_each_outcome(const DiscreteTask& table,
                      const std::function<void(std::span<const std::uint32_t>, std::uint32_t, double)>& visit) {
    const std::size_t kk = table.devices();
    std::vector<std::uint32_t> xs(kk, 0);
    for (std::uint32_t y = 0; y < table.num_classes(); ++y) {
        std::fill(xs.begin(), xs.end(), 0u);
        while (true) {
            double p = table.prior[y];
            for (std::size_t k = 0; k < kk; ++k) p *= table.conditionals[k][y][xs[k]];
            visit(xs, y, p);
            std::size_t k = 0;
            while (k < kk && ++xs[k] == table.alphabet(k)) xs[k++] = 0;
            if (k == kk) break;
        }
    }
}

double exact_label_information(const DiscreteTask& table,
                               const std::function<std::uint64_t(std::span<const std::uint32_t>)>& code) {
    std::map<std::uint64_t, std::vector<double>> joint;  // code -> p(code, y)
    for_each_outcome(table, [&](std::span<const std::uint32_t> xs, std::uint32_t y, double p) {
        auto& row = joint[code(xs)];
        row.resize(table.num_classes(), 0.0);
        row[y] += p;
    });
    double mi = 0.0;
    for (const auto& [c, row] : joint) {
        double pc = 0.0;
        for (double v : row) pc += v;
        for (std::size_t y = 0; y < row.size(); ++y) mi += xlogx_ratio(row[y], pc, table.prior[y]);
    }
    return mi;
}

double exact_label_information_view(const DiscreteTask& table, std::size_t k) {
    if (k >= table.devices()) throw std::out_of_range("synthetic: view index out of range");
    return exact_label_information(table, [k](std::span<const std::uint32_t> xs) { return std::uint64_t{xs[k]}; });
}

double label_entropy(const DiscreteTask& table) {
    double h = 0.0;
    for (double p : table.prior) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

double plugin_mutual_information(std::span<const std::uint64_t> a, std::span<const std::uint32_t> b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("plugin MI: paired samples required");
    std::map<std::pair<std::uint64_t, std::uint32_t>, double> pab;
    std::map<std::uint64_t, double> pa;
    std::map<std::uint32_t, double> pb;
    const double w = 1.0 / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        pab[{a[i], b[i]}] += w;
        pa[a[i]] += w;
        pb[b[i]] += w;
    }
    double mi = 0.0;
    for (const auto& [key, p] : pab) mi += xlogx_ratio(p, pa[key.first], pb[key.second]);
    return mi;
}

}  // namespace tocomm::data
