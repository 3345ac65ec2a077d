#include "imloc/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace imloc {

ag::Var ParameterStore::add_parameter(std::string name, Tensor init, bool weight_decay) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name " + name);
  auto v = ag::parameter(std::move(init));
  entries_.push_back({std::move(name), v, Kind::parameter, weight_decay});
  return v;
}

ag::Var ParameterStore::add_buffer(std::string name, Tensor init) {
  if (find(name)) throw std::invalid_argument("duplicate buffer name " + name);
  auto v = ag::constant(std::move(init));
  entries_.push_back({std::move(name), v, Kind::buffer, false});
  return v;
}

const ParameterStore::Entry* ParameterStore::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

ParameterStore::Entry* ParameterStore::find(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

std::int64_t ParameterStore::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_)
    if (e.kind == Kind::parameter) n += e.var.value().numel();
  return n;
}

namespace init {

Tensor trunc_normal(Shape shape, double std, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    double v = 0;
    do {
      v = rng.normal();
    } while (std::fabs(v) > 2.0);
    t[i] = static_cast<float>(v * std);
  }
  return t;
}

Tensor fan_in_uniform(Shape shape, std::int64_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(3.0 / static_cast<double>(std::max<std::int64_t>(1, fan_in)));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace init

}  // namespace imloc
