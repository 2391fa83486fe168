#pragma once

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mphcnn/tensor.hpp"

namespace mphcnn::testing {

inline Tensor random_tensor(shape_t shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& x : t.data()) {
        x = u(rng);
    }
    return t;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& x : v) {
        x = u(rng);
    }
    return v;
}

using graph_fn = std::function<Var(Tape&, std::vector<Var> const&)>;

/// Largest relative error between tape gradients and central differences of
/// sum(probe * build(params)) over every parameter.
inline double gradient_error(std::vector<Tensor*> const& params, graph_fn const& build, std::mt19937_64& rng) {
    std::vector<double> probe;
    auto objective = [&](Tape& tape) {
        std::vector<Var> vars;
        for (auto* p : params) {
            vars.push_back(tape.parameter(*p));
        }
        auto out = build(tape, vars);
        if (probe.empty()) {
            probe = random_vector(tape.value(out).size(), rng, 0.5, 1.5);
        }
        return sum(tape, mul_constant(tape, out, probe));
    };
    for (auto* p : params) {
        p->zero_grad();
    }
    {
        Tape tape;
        tape.backward(objective(tape));
    }
    double worst = 0.0;
    for (auto* p : params) {
        std::vector<double> analytic(p->grad().begin(), p->grad().end());
        auto numeric = finite_difference_gradient(
            [&] {
                Tape tape;
                return tape.value(objective(tape))[0];
            },
            *p);
        worst = std::max(worst, max_relative_error(analytic, numeric));
    }
    return worst;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(std::string const& name) {
        m_path = std::filesystem::temp_directory_path() / ("mphcnn_test_" + name);
        std::filesystem::remove_all(m_path);
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(TempDir const&) = delete;
    TempDir& operator=(TempDir const&) = delete;

    [[nodiscard]] std::filesystem::path const& path() const { return m_path; }
    [[nodiscard]] std::filesystem::path operator/(std::string const& name) const { return m_path / name; }

  private:
    std::filesystem::path m_path;
};

inline void write_file(std::filesystem::path const& path, std::string const& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(std::filesystem::path const& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace mphcnn::testing
