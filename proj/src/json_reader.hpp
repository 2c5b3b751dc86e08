#pragma once

// Strict reading of JSON objects: typed accessors that report the field path, and a check that
// every key was consumed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "drcs/errors.hpp"
#include "drcs/linalg.hpp"

namespace drcs::jsonio {

using nlohmann::json;

class Object {
 public:
  Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) throw ParseError(at(key), "missing field");
    used_.insert(key);
    return *it;
  }
  Object object(const std::string& key) { return {raw(key), at(key)}; }

  double number(const std::string& key) { return as_number(raw(key), at(key)); }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
  /// Like number() but null reads as NaN (non-finite values are written as null).
  double real(const std::string& key) {
    const json& v = raw(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : as_number(v, at(key));
  }
  long integer(const std::string& key) { return as_integer(raw(key), at(key)); }
  long integer(const std::string& key, long fallback) { return has(key) ? integer(key) : fallback; }
  bool boolean(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_boolean()) throw ParseError(at(key), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ParseError(at(key), "expected a string");
    return v.get<std::string>();
  }
  VectorXd vector(const std::string& key) { return as_vector(raw(key), at(key)); }
  MatrixXd matrix(const std::string& key) { return as_matrix(raw(key), at(key)); }
  const json& array(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ParseError(at(key), "expected an array");
    return v;
  }

  /// Throws on any key that was not read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ParseError(at(it.key()), "unknown field");
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ParseError(where, "expected a finite number");
    return x;
  }
  static long as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ParseError(where, "expected an integer");
    return v.get<long>();
  }
  static VectorXd as_vector(const json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where, "expected an array of numbers");
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = as_number(v[i], where + "[" + std::to_string(i) + "]");
    return out;
  }
  static MatrixXd as_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ParseError(where, "expected a nonempty array of rows");
    const auto rows = v.size();
    std::size_t cols = 0;
    MatrixXd out;
    for (std::size_t i = 0; i < rows; ++i) {
      const VectorXd row = as_vector(v[i], where + "[" + std::to_string(i) + "]");
      if (i == 0) {
        cols = static_cast<std::size_t>(row.size());
        out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      } else if (static_cast<std::size_t>(row.size()) != cols) {
        throw ParseError(where, "rows have different lengths");
      }
      out.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline json real(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(VectorXd(m.row(i).transpose())));
  return a;
}

/// Parses text, turning syntax errors into ParseError with a line number.
inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ParseError(source + ":" + std::to_string(line), "invalid JSON");
  }
}

}  // namespace drcs::jsonio
