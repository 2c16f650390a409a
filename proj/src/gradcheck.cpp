#include "strata/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "strata/rng.hpp"

namespace strata {

namespace {

double eval_loss(ParameterStore& store,
                 const std::function<Value(Tape&, ParameterStore&)>& build) {
  Tape tape;
  const Value loss = build(tape, store);
  return tape.val(loss).data[0];
}

} // namespace

GradCheckReport grad_check(ParameterStore& store,
                           const std::function<Value(Tape&, ParameterStore&)>& build,
                           const GradCheckConfig& cfg) {
  // Analytic pass.
  store.zero_grads();
  {
    Tape tape;
    const Value loss = build(tape, store);
    tape.backward(loss);
  }
  std::map<std::string, DenseArray> analytic;
  for (auto& [name, e] : store.entries()) analytic.emplace(name, e.grad);
  store.zero_grads();

  // Enumerate probe sites.
  std::vector<std::pair<std::string, std::size_t>> sites;
  for (const auto& [name, e] : store.entries())
    for (std::size_t i = 0; i < e.value.numel(); ++i) sites.emplace_back(name, i);
  if (cfg.max_samples > 0 && sites.size() > cfg.max_samples) {
    Rng rng(Rng::derive(cfg.sample_seed, "grad_check"));
    rng.shuffle(sites);
    sites.resize(cfg.max_samples);
  }

  GradCheckReport report;
  for (const auto& [name, i] : sites) {
    double& slot = store.value(name).data[i];
    const double saved = slot;
    slot = saved + cfg.h;
    const double lp = eval_loss(store, build);
    slot = saved - cfg.h;
    const double lm = eval_loss(store, build);
    slot = saved;
    const double fd = (lp - lm) / (2.0 * cfg.h);
    const double an = analytic.at(name).data[i];
    const double denom = std::max({1e-10, std::abs(an), std::abs(fd)});
    const double rel = std::abs(an - fd) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = name;
      report.worst_index = i;
    }
    ++report.checked;
  }
  return report;
}

} // namespace strata
