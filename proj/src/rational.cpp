#include "madlab/rational.hpp"

#include <cctype>
#include <stdexcept>

namespace madlab {

namespace {

BigInt parse_int(std::string_view s, std::string_view whole) {
  if (s.empty()) throw std::invalid_argument("malformed number: '" + std::string(whole) + "'");
  BigInt v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw std::invalid_argument("malformed number: '" + std::string(whole) + "'");
    v = v * 10 + (c - '0');
  }
  return v;
}

BigInt pow10(long e) {
  BigInt p = 1;
  for (long i = 0; i < e; ++i) p *= 10;
  return p;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) throw std::invalid_argument("empty number");

  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(s.substr(0, slash));
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator: '" + std::string(text) + "'");
    return num / den;
  }

  bool neg = false;
  if (s.front() == '-' || s.front() == '+') {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }

  long exponent = 0;
  if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view es = s.substr(e + 1);
    bool eneg = false;
    if (!es.empty() && (es.front() == '-' || es.front() == '+')) {
      eneg = es.front() == '-';
      es.remove_prefix(1);
    }
    if (es.empty() || es.size() > 6) throw std::invalid_argument("malformed exponent: '" + std::string(text) + "'");
    exponent = static_cast<long>(parse_int(es, text));
    if (eneg) exponent = -exponent;
    s = s.substr(0, e);
  }

  std::string digits;
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    std::string_view ip = s.substr(0, dot);
    std::string_view fp = s.substr(dot + 1);
    if (ip.empty() && fp.empty()) throw std::invalid_argument("malformed number: '" + std::string(text) + "'");
    digits = std::string(ip) + std::string(fp);
    exponent -= static_cast<long>(fp.size());
  } else {
    digits = std::string(s);
  }

  Rational r(parse_int(digits, text));
  if (exponent > 0) r *= Rational(pow10(exponent));
  if (exponent < 0) r /= Rational(pow10(-exponent));
  return neg ? Rational(-r) : r;
}

std::string to_string(const Rational& r) {
  BigInt n = boost::multiprecision::numerator(r);
  BigInt d = boost::multiprecision::denominator(r);
  if (d == 1) return n.str();
  return n.str() + "/" + d.str();
}

std::string to_decimal(const Rational& r, int digits) {
  bool neg = r < 0;
  Rational a = neg ? Rational(-r) : r;
  BigInt scale = pow10(digits);
  Rational scaled = a * Rational(scale);
  BigInt n = boost::multiprecision::numerator(scaled);
  BigInt d = boost::multiprecision::denominator(scaled);
  BigInt q = n / d;
  BigInt rem = n % d;
  if (rem * 2 >= d) q += 1;
  std::string s = q.str();
  if (digits > 0) {
    if (static_cast<int>(s.size()) <= digits) s.insert(0, static_cast<std::size_t>(digits) + 1 - s.size(), '0');
    s.insert(s.size() - static_cast<std::size_t>(digits), ".");
  }
  if (neg && q != 0) s.insert(0, "-");
  return s;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace madlab
