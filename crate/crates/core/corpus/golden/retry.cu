// Generated by irglc from module `retry`.
#include "irgl_runtime.cuh"

__managed__ irgl::Array tries;
__managed__ irgl::Array done;

__global__ void irgl_work(irgl::PipeContext *irgl_wl) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  irgl::value_t x = 0;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = irgl_wl->in->size();
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t i = irgl_idx_1;
      x = irgl_wl->in->pop(i);
      if (x % 2 == 1 && tries[x] == 0) {
        tries[x] = 1;
        irgl_wl->retry->push(x);
      } else {
        done[x] = done[x] + 1;
        irgl_wl->out->push(x);
      }
    }
  }
}

void irgl_main() {
  {
    irgl::HostPipe irgl_pipe_1(IRGL_DEFAULT_WL_SIZE);
    irgl_pipe_1.push_in(0);
    irgl_pipe_1.push_in(1);
    irgl_pipe_1.push_in(2);
    irgl_pipe_1.push_in(3);
    irgl_pipe_1.push_in(4);
    irgl_pipe_1.push_in(5);
    {
      const int irgl_grid_2 = irgl::sm_count() * 8;
      // Retried items are re-launched as they are; conflict management is left to the program.
      while (true) {
        irgl_work<<<irgl_grid_2, 1024>>>(irgl_pipe_1.ctx);
        irgl::check(cudaDeviceSynchronize(), "work");
        if (irgl_pipe_1.retry_size() == 0) break;
        irgl_pipe_1.swap_in_retry();
      }
      irgl_pipe_1.swap_in_out();
    }
  }
}
