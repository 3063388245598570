#pragma once

#include <cstdint>

#if !defined(__x86_64__) || !defined(__linux__)
#error "this library targets x86-64 Linux"
#endif

namespace rewind {

/// Callee-saved register set plus stack/instruction pointers. Enough to
/// resume execution at a capture point from any stack, including after the
/// stack that was live at capture time has been abandoned.
struct CpuContext {
  uint64_t rbx;
  uint64_t rbp;
  uint64_t r12;
  uint64_t r13;
  uint64_t r14;
  uint64_t r15;
  uint64_t rsp;
  uint64_t rip;
};

}  // namespace rewind

extern "C" {

/// Returns 0 at capture; returns the nonzero value passed to
/// rewind_ctx_resume when resumed. Must be invoked from a frame that is
/// still live when resume happens (setjmp discipline applies).
int rewind_ctx_capture(rewind::CpuContext*) __attribute__((returns_twice));

[[noreturn]] void rewind_ctx_resume(const rewind::CpuContext*, int value);

/// Runs fn(arg) on the given stack (top must be 16-byte aligned) and
/// returns here when fn returns normally. A resume past this call simply
/// abandons the switched stack.
void rewind_stack_call(void* stack_top, void (*fn)(void*), void* arg);
}
