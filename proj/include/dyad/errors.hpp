#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dyad {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Recoverable wikitext parse failure; names the offending article.
class ParseError : public Error {
 public:
  ParseError(std::string article, const std::string& what)
      : Error(article + ": " + what), article_(std::move(article)) {}
  const std::string& article() const { return article_; }

 private:
  std::string article_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when hidden information is requested through a restricted view.
class LeakError : public Error {
 public:
  using Error::Error;
};

// Redirect cycle or hop limit exceeded. Carries the followed chain.
class RedirectError : public Error {
 public:
  RedirectError(std::vector<std::string> chain, const std::string& what)
      : Error(what), chain_(std::move(chain)) {}
  const std::vector<std::string>& chain() const { return chain_; }

 private:
  std::vector<std::string> chain_;
};

}  // namespace dyad
