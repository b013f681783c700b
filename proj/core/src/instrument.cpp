#include "pbdw/instrument.hpp"

#include <algorithm>

namespace pbdw::instrument {

namespace {
thread_local Scope* g_active = nullptr;
}

Scope::Scope() : previous_(g_active) { g_active = this; }

Scope::~Scope() { g_active = previous_; }

const std::vector<Factorization>& Scope::events() const { return events_; }

int Scope::largest() const {
  int m = 0;
  for (const auto& e : events_) m = std::max(m, e.size);
  return m;
}

void record_factorization(int size, const char* stage) {
  if (g_active != nullptr) {
    g_active->events_.push_back(Factorization{size, stage});
  }
}

}  // namespace pbdw::instrument
