#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "imloc/autograd.hpp"
#include "imloc/rng.hpp"

namespace imloc {

/// Named, ordered registry of trainable parameters and non-trainable buffers
/// (e.g. batch-norm running statistics). Modules keep Var handles that share
/// storage with the entries here.
class ParameterStore {
 public:
  enum class Kind { parameter, buffer };
  struct Entry {
    std::string name;
    ag::Var var;
    Kind kind = Kind::parameter;
    bool weight_decay = true;
  };

  ag::Var add_parameter(std::string name, Tensor init, bool weight_decay = true);
  ag::Var add_buffer(std::string name, Tensor init);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  const Entry* find(std::string_view name) const;
  Entry* find(std::string_view name);

  void zero_grad();
  std::int64_t parameter_count() const;

 private:
  std::vector<Entry> entries_;
};

namespace init {
/// Normal(0, std) truncated to +-2 std.
Tensor trunc_normal(Shape shape, double std, Rng& rng);
/// Kaiming-uniform style fan-in scaling for conv weights (O, C, k, k).
Tensor fan_in_uniform(Shape shape, std::int64_t fan_in, Rng& rng);
}  // namespace init

}  // namespace imloc
