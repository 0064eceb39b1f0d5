#include <atomic>

#include "spdcal/errors.hpp"
#include "spdcal/kernels.hpp"

namespace spdcal::kernels {
namespace {

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> t{&table(detected_isa())};
  return t;
}

std::atomic<Isa>& current_isa() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(SPDCAL_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() { return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

const Table& table(Isa isa) {
  if (!isa_available(isa)) {
    throw InvalidArgument("kernel ISA '" + std::string(isa_name(isa)) + "' not available");
  }
#if defined(SPDCAL_HAVE_AVX2)
  if (isa == Isa::avx2) return avx2::table();
#endif
  return scalar::table();
}

const Table& active() { return *current().load(std::memory_order_acquire); }

Isa active_isa() { return current_isa().load(std::memory_order_acquire); }

void force_isa(Isa isa) {
  const Table& t = table(isa);
  current().store(&t, std::memory_order_release);
  current_isa().store(isa, std::memory_order_release);
}

}  // namespace spdcal::kernels
