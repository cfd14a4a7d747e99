#pragma once

#include <Eigen/Dense>

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace orsp {

using Matrix = Eigen::MatrixXd;

/// Named trainable tensors with parallel gradient accumulators and
/// optimizer moment slots. Value-copyable; a copy is an independent
/// snapshot safe to share across threads read-only.
class ParamStore {
 public:
  Matrix& add(const std::string& name, Matrix value) {
    if (values_.count(name)) throw std::invalid_argument("duplicate param: " + name);
    auto& slot = values_[name] = std::move(value);
    grads_[name] = Matrix::Zero(slot.rows(), slot.cols());
    return slot;
  }

  bool has(const std::string& name) const { return values_.count(name) != 0; }

  Matrix& value(const std::string& name) { return find(values_, name); }
  const Matrix& value(const std::string& name) const { return find(values_, name); }
  Matrix& grad(const std::string& name) { return find(grads_, name); }
  const Matrix& grad(const std::string& name) const { return find(grads_, name); }

  void zero_grads() {
    for (auto& [name, g] : grads_) g.setZero();
  }

  void scale_grads(double s) {
    for (auto& [name, g] : grads_) g *= s;
  }

  /// Names in sorted order; the canonical iteration order everywhere.
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [name, v] : values_) out.push_back(name);
    return out;
  }

  std::size_t tensor_count() const { return values_.size(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : values_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  // Adam moment slots, allocated on first touch.
  Matrix& opt_m(const std::string& name) { return moment(m_, name); }
  Matrix& opt_v(const std::string& name) { return moment(v_, name); }
  const Matrix& opt_m(const std::string& name) const { return find(m_, name); }
  const Matrix& opt_v(const std::string& name) const { return find(v_, name); }
  bool has_opt_state() const { return !m_.empty(); }
  void clear_opt_state() {
    m_.clear();
    v_.clear();
  }

 private:
  using Map = std::map<std::string, Matrix>;

  static Matrix& find(Map& m, const std::string& name) {
    auto it = m.find(name);
    if (it == m.end()) throw std::out_of_range("unknown param: " + name);
    return it->second;
  }
  static const Matrix& find(const Map& m, const std::string& name) {
    auto it = m.find(name);
    if (it == m.end()) throw std::out_of_range("unknown param: " + name);
    return it->second;
  }

  Matrix& moment(Map& slots, const std::string& name) {
    auto it = slots.find(name);
    if (it == slots.end()) {
      const Matrix& v = value(name);
      it = slots.emplace(name, Matrix::Zero(v.rows(), v.cols())).first;
    }
    return it->second;
  }

  Map values_;
  Map grads_;
  Map m_, v_;
};

}  // namespace orsp
