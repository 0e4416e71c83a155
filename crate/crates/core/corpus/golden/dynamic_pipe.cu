// Generated by irglc from module `dynamic_pipe`.
#include "irgl_runtime.cuh"

__managed__ bool cond = true;
__managed__ irgl::value_t count = 8;
__managed__ irgl::value_t total = 0;
__managed__ irgl::Array locks;

__global__ void irgl_A(irgl::PipeContext *irgl_wl) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = count;
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t i = irgl_idx_1;
      irgl_wl->out->push(i);
    }
  }
}

__global__ void irgl_B(irgl::PipeContext *irgl_wl) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  irgl::value_t v = 0;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = irgl_wl->in->size();
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t i = irgl_idx_1;
      v = irgl_wl->in->pop(i);
      {
        bool irgl_done_2 = false;
        while (!irgl_done_2) {
          if (atomicCAS((unsigned long long *)&(locks[0]), 0ULL, 1ULL) == 0ULL) {
            __threadfence();
            total = total + v;
            __threadfence();
            atomicExch((unsigned long long *)&(locks[0]), 0ULL);
            irgl_done_2 = true;
          }
        }
      }
    }
  }
}

__global__ void irgl_C(irgl::PipeContext *irgl_wl) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  irgl::value_t v = 0;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = irgl_wl->in->size();
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t i = irgl_idx_1;
      v = irgl_wl->in->pop(i);
      {
        bool irgl_done_2 = false;
        while (!irgl_done_2) {
          if (atomicCAS((unsigned long long *)&(locks[0]), 0ULL, 1ULL) == 0ULL) {
            __threadfence();
            total = total - v;
            __threadfence();
            atomicExch((unsigned long long *)&(locks[0]), 0ULL);
            irgl_done_2 = true;
          }
        }
      }
    }
  }
}

void irgl_main() {
  {
    irgl::HostPipe irgl_pipe_1(IRGL_DEFAULT_WL_SIZE);
    {
      const int irgl_grid_2 = irgl::sm_count() * 8;
      irgl_A<<<irgl_grid_2, 1024>>>(irgl_pipe_1.ctx);
      irgl::check(cudaDeviceSynchronize(), "A");
      irgl_pipe_1.swap_in_out();
    }
    if (cond) {
      {
        const int irgl_grid_3 = irgl::sm_count() * 8;
        irgl_B<<<irgl_grid_3, 1024>>>(irgl_pipe_1.ctx);
        irgl::check(cudaDeviceSynchronize(), "B");
        irgl_pipe_1.swap_in_out();
      }
    } else {
      {
        const int irgl_grid_4 = irgl::sm_count() * 8;
        irgl_C<<<irgl_grid_4, 1024>>>(irgl_pipe_1.ctx);
        irgl::check(cudaDeviceSynchronize(), "C");
        irgl_pipe_1.swap_in_out();
      }
    }
  }
}
