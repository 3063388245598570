#include "rewind/cpu_context.hpp"

// Offsets below match the field order of CpuContext.
static_assert(sizeof(rewind::CpuContext) == 64);

asm(R"(
.text

.globl rewind_ctx_capture
.type rewind_ctx_capture,@function
rewind_ctx_capture:
    mov %rbx,  0(%rdi)
    mov %rbp,  8(%rdi)
    mov %r12, 16(%rdi)
    mov %r13, 24(%rdi)
    mov %r14, 32(%rdi)
    mov %r15, 40(%rdi)
    lea 8(%rsp), %rax        /* caller rsp after our ret */
    mov %rax, 48(%rdi)
    mov (%rsp), %rax         /* return address */
    mov %rax, 56(%rdi)
    xor %eax, %eax
    ret
.size rewind_ctx_capture, .-rewind_ctx_capture

.globl rewind_ctx_resume
.type rewind_ctx_resume,@function
rewind_ctx_resume:
    mov  0(%rdi), %rbx
    mov  8(%rdi), %rbp
    mov 16(%rdi), %r12
    mov 24(%rdi), %r13
    mov 32(%rdi), %r14
    mov 40(%rdi), %r15
    mov 48(%rdi), %rsp
    mov %esi, %eax
    test %eax, %eax
    jnz 1f
    inc %eax                 /* resume value is never 0 */
1:  jmp *56(%rdi)
.size rewind_ctx_resume, .-rewind_ctx_resume

.globl rewind_stack_call
.type rewind_stack_call,@function
rewind_stack_call:
    push %rbp
    mov %rsp, %rbp
    mov %rdi, %rsp           /* switch to the new stack */
    mov %rdx, %rdi
    call *%rsi
    mov %rbp, %rsp           /* back to the original stack */
    pop %rbp
    ret
.size rewind_stack_call, .-rewind_stack_call
)");
