#ifndef OTE_GRAD_CHECK_HPP
#define OTE_GRAD_CHECK_HPP

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ote/error.hpp"
#include "ote/graph.hpp"
#include "ote/tensor.hpp"

namespace ote {

template <typename S>
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::map<std::string, double> per_param;
};

template <typename S>
using ParamRefs = std::vector<std::pair<std::string, Tensor<S>*>>;

// Central-difference check of the analytic gradients. `build` constructs
// the loss on a fresh graph, reading the current values of the tensors in
// `params` (it must register each of them under the listed name). The
// reported error is max over entries of
// |analytic - central_difference| / max(1, |analytic|).
template <typename S>
GradCheckReport<S> grad_check(const std::function<NodeId(Graph<S>&)>& build,
                              const ParamRefs<S>& params, S eps = S(1e-5)) {
  if (eps <= S(0)) throw ValidationError("grad_check eps must be positive");

  auto eval = [&]() -> double {
    Graph<S> g;
    NodeId loss = build(g);
    return static_cast<double>(g.value(loss).scalar_value());
  };

  GradMap<S> analytic;
  {
    Graph<S> g;
    NodeId loss = build(g);
    g.backward(loss);
    analytic = g.parameter_gradients();
  }

  GradCheckReport<S> report;
  for (const auto& [name, tensor] : params) {
    auto it = analytic.find(name);
    if (it == analytic.end()) {
      throw LookupError("grad_check: builder never registered parameter " +
                        name);
    }
    const Tensor<S>& grad = it->second;
    double worst = 0.0;
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      S orig = (*tensor)[i];
      (*tensor)[i] = orig + eps;
      double up = eval();
      (*tensor)[i] = orig - eps;
      double down = eval();
      (*tensor)[i] = orig;
      double fd = (up - down) / (2.0 * static_cast<double>(eps));
      double an = static_cast<double>(grad[i]);
      if (!std::isfinite(fd) || !std::isfinite(an)) {
        throw DiagnosticError("grad_check: non-finite values for parameter " +
                              name);
      }
      double rel = std::abs(an - fd) / std::max(1.0, std::abs(an));
      worst = std::max(worst, rel);
    }
    report.per_param[name] = worst;
    if (worst >= report.max_rel_error) {
      if (worst > report.max_rel_error || report.worst_param.empty()) {
        report.max_rel_error = worst;
        report.worst_param = name;
      }
    }
  }
  return report;
}

}  // namespace ote

#endif  // OTE_GRAD_CHECK_HPP
