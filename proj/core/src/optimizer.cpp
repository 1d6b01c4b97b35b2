#include <cmath>

#include "sola/error.hpp"
#include "sola/trainer.hpp"

namespace sola {

using ad::Tensor;

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, int t,
                 const AdamOptions& o) {
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
    param[i] -= o.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.eps);
  }
}

Adam::Adam(const ad::ParameterStore& store, const AdamOptions& options)
    : store_(&store), opt_(options) {
  for (const auto& p : store.parameters()) {
    m_.emplace_back(p.value.rows(), p.value.cols());
    v_.emplace_back(p.value.rows(), p.value.cols());
  }
}

void Adam::step() {
  if (!store_) throw ContractError("Adam: no parameter store");
  if (store_->size() != m_.size()) throw ContractError("Adam: parameter set changed");
  ++t_;
  auto params = store_->parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Value p = params[i].value;
    const Tensor empty;
    adam_update(p.mutable_data(), p.has_grad() ? p.grad() : empty, m_[i], v_[i], t_, opt_);
  }
}

nlohmann::json Adam::state_to_json() const {
  nlohmann::json m = nlohmann::json::array(), v = nlohmann::json::array();
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m.push_back(ad::tensor_to_json(m_[i]));
    v.push_back(ad::tensor_to_json(v_[i]));
  }
  return {{"t", t_}, {"m", m}, {"v", v}};
}

void Adam::load_state_json(const nlohmann::json& doc) {
  try {
    const auto& m = doc.at("m");
    const auto& v = doc.at("v");
    if (m.size() != m_.size() || v.size() != v_.size()) {
      throw CompatibilityError("optimizer state has " + std::to_string(m.size()) +
                               " moments for " + std::to_string(m_.size()) + " parameters");
    }
    std::vector<Tensor> nm, nv;
    for (std::size_t i = 0; i < m_.size(); ++i) {
      nm.push_back(ad::tensor_from_json(m[i]));
      nv.push_back(ad::tensor_from_json(v[i]));
      if (nm[i].rows() != m_[i].rows() || nm[i].cols() != m_[i].cols() ||
          nv[i].rows() != v_[i].rows() || nv[i].cols() != v_[i].cols()) {
        throw CompatibilityError("optimizer state shape mismatch at parameter " + std::to_string(i));
      }
    }
    t_ = doc.at("t").get<int>();
    m_ = std::move(nm);
    v_ = std::move(nv);
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError(std::string("malformed optimizer state: ") + e.what());
  }
}

}  // namespace sola
