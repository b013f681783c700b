#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pbdw::instrument {

struct Factorization {
  int size = 0;
  std::string stage;
};

/// RAII collector for dense-factorization events on the current thread.
/// Used by the cost report to verify the online operation structure.
class Scope {
 public:
  Scope();
  ~Scope();
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;

  const std::vector<Factorization>& events() const;
  int largest() const;

 private:
  friend void record_factorization(int size, const char* stage);
  std::vector<Factorization> events_;
  Scope* previous_;
};

/// Records a dense factorization of the given size if a Scope is active.
void record_factorization(int size, const char* stage);

}  // namespace pbdw::instrument
