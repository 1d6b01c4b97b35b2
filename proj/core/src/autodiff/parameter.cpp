#include "sola/autodiff/parameter.hpp"

#include <algorithm>
#include <fstream>

#include "sola/error.hpp"

namespace sola::ad {

Value ParameterStore::add(std::string name, Tensor init) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  Value v = Value::variable(std::move(init));
  params_.push_back({std::move(name), v});
  return v;
}

bool ParameterStore::contains(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

const Value& ParameterStore::get(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw ContractError("unknown parameter: " + std::string(name));
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() const {
  for (const auto& p : params_) p.value.zero_grad();
}

nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", {t.rows(), t.cols()}}, {"data", t.values()}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw CompatibilityError("tensor shape must have two extents");
  return Tensor(shape[0], shape[1], j.at("data").get<std::vector<double>>());
}

nlohmann::json ParameterStore::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : params_) {
    nlohmann::json entry = tensor_to_json(p.value.data());
    entry["name"] = p.name;
    list.push_back(std::move(entry));
  }
  return {{"format", "sola.params"}, {"version", kFormatVersion}, {"params", std::move(list)}};
}

void ParameterStore::load_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "sola.params") {
    throw CompatibilityError("not a sola.params document");
  }
  if (doc.value("version", 0) != kFormatVersion) {
    throw CompatibilityError("unsupported sola.params version " +
                             std::to_string(doc.value("version", 0)));
  }
  std::vector<std::pair<std::string, Tensor>> incoming;
  for (const auto& entry : doc.at("params")) {
    incoming.emplace_back(entry.at("name").get<std::string>(), tensor_from_json(entry));
  }
  for (auto& p : params_) {
    auto it = std::find_if(incoming.begin(), incoming.end(),
                           [&](const auto& e) { return e.first == p.name; });
    if (it == incoming.end()) throw CompatibilityError("missing parameter " + p.name);
    if (!it->second.same_shape(p.value.data())) {
      throw CompatibilityError("parameter " + p.name + " has shape " +
                               it->second.shape_string() + ", expected " +
                               p.value.data().shape_string());
    }
  }
  for (auto& p : params_) {
    auto it = std::find_if(incoming.begin(), incoming.end(),
                           [&](const auto& e) { return e.first == p.name; });
    p.value.mutable_data() = std::move(it->second);
  }
}

void ParameterStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

void ParameterStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CompatibilityError("cannot read " + path.string());
  load_json(nlohmann::json::parse(in));
}

}  // namespace sola::ad
