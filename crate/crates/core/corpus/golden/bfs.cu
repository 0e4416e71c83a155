// Generated by irglc from module `bfs`.
#include "irgl_runtime.cuh"

__managed__ irgl::Array level;
__managed__ irgl::value_t LEVEL = 0;

__global__ void irgl_BFS(irgl::PipeContext *irgl_wl, irgl::CSRGraph graph, irgl::value_t LEVEL) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  irgl::value_t n = 0;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = irgl_wl->in->size();
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t wlidx = irgl_idx_1;
      n = irgl_wl->in->pop(wlidx);
      for (irgl::value_t e = IRGL_EDGE_BEGIN(graph, n), irgl_end_3 = IRGL_EDGE_END(graph, n); e < irgl_end_3; e++) {
        if (level[IRGL_DST(e)] == IRGL_INF) {
          level[IRGL_DST(e)] = LEVEL;
          irgl_wl->out->push(IRGL_DST(e));
        }
      }
    }
  }
}

void irgl_main(irgl::CSRGraph graph, irgl::value_t src) {
  irgl_graph = graph;
  for (irgl::value_t n = 0, irgl_end_1 = IRGL_NNODES(graph); n < irgl_end_1; n++) {
    level[n] = IRGL_INF;
  }
  level[src] = 0;
  LEVEL = 1;
  {
    irgl::HostPipe irgl_pipe_2(IRGL_DEFAULT_WL_SIZE);
    irgl_pipe_2.push_in(src);
    while (true) {
      if (irgl_pipe_2.in_size() == 0) break;
      {
        const int irgl_grid_3 = irgl::sm_count() * 8;
        irgl_BFS<<<irgl_grid_3, 1024>>>(irgl_pipe_2.ctx, graph, LEVEL);
        irgl::check(cudaDeviceSynchronize(), "BFS");
        irgl_pipe_2.swap_in_out();
      }
      LEVEL++;
    }
  }
}
