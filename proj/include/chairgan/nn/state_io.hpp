#pragma once

#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "chairgan/core/container.hpp"
#include "chairgan/nn/adam.hpp"
#include "chairgan/nn/layer.hpp"

namespace chairgan::nn {

template <typename T>
constexpr const char* scalar_tag() {
  if constexpr (std::is_same_v<T, float>)
    return "f32";
  else if constexpr (std::is_same_v<T, double>)
    return "f64";
  else
    static_assert(sizeof(T) == 0, "unsupported scalar type");
}

template <typename T>
void store_arrays(Container& c, const std::string& prefix, const std::vector<ParamRef<T>>& refs) {
  for (const auto& r : refs) c.add(prefix + r.name, pack_values(std::span<const T>(r.param->value)));
}

template <typename T>
void load_arrays(const Container& c, const std::string& prefix, const std::vector<ParamRef<T>>& refs) {
  for (const auto& r : refs) {
    auto values = unpack_values<T>(c.at(prefix + r.name));
    if (values.size() != r.param->value.size())
      throw CheckpointError("size mismatch for " + prefix + r.name + ": checkpoint has " + std::to_string(values.size()) +
                            ", model expects " + std::to_string(r.param->value.size()));
    r.param->value.assign(values.begin(), values.end());
  }
}

template <typename T>
void store_adam(Container& c, const std::string& prefix, const Adam<T>& opt) {
  std::uint64_t t = opt.steps();
  c.add(prefix + "t", pack_values(std::span<const std::uint64_t>(&t, 1)));
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    c.add(prefix + "m." + std::to_string(i), pack_values(std::span<const T>(opt.first_moments()[i])));
    c.add(prefix + "v." + std::to_string(i), pack_values(std::span<const T>(opt.second_moments()[i])));
  }
}

template <typename T>
void load_adam(const Container& c, const std::string& prefix, Adam<T>& opt, const std::vector<ParamRef<T>>& params) {
  const auto t = unpack_values<std::uint64_t>(c.at(prefix + "t"));
  if (t.size() != 1) throw CheckpointError("malformed optimizer step counter");
  opt.set_steps(t[0]);
  opt.first_moments().clear();
  opt.second_moments().clear();
  if (t[0] == 0) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = unpack_values<T>(c.at(prefix + "m." + std::to_string(i)));
    auto v = unpack_values<T>(c.at(prefix + "v." + std::to_string(i)));
    if (m.size() != params[i].param->size() || v.size() != params[i].param->size())
      throw CheckpointError("optimizer state size mismatch at " + prefix + std::to_string(i));
    opt.first_moments().push_back(std::move(m));
    opt.second_moments().push_back(std::move(v));
  }
}

}  // namespace chairgan::nn
