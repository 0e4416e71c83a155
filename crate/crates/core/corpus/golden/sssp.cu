// Generated by irglc from module `sssp`.
#include "irgl_runtime.cuh"

__managed__ irgl::Array dist;
__managed__ irgl::Array dist_locks;
__managed__ irgl::value_t rounds = 0;

template <int IRGL_RED>
__global__ void __launch_bounds__(256, 2) irgl_relax(irgl::RetCell irgl_ret, irgl::CSRGraph graph) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  bool irgl_acc = irgl::red_identity<IRGL_RED>();
  bool changed = false;
  irgl::value_t nd = 0;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = IRGL_NNODES(graph);
    const irgl::value_t irgl_chunk_1 = (irgl_end_1 - irgl_begin_1 + irgl_nthreads - 1) / irgl_nthreads;
    const irgl::value_t irgl_stop_1 = irgl::min_of(irgl_begin_1 + (irgl_tid + 1) * irgl_chunk_1, irgl_end_1);
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid * irgl_chunk_1; irgl_idx_1 < irgl_stop_1; irgl_idx_1++) {
      irgl::value_t n = irgl_idx_1;
      changed = false;
      if (dist[n] != IRGL_INF) {
        for (irgl::value_t e = IRGL_EDGE_BEGIN(graph, n), irgl_end_2 = IRGL_EDGE_END(graph, n); e < irgl_end_2; e++) {
          nd = dist[n] + IRGL_WEIGHT(e);
          {
            bool irgl_done_3 = false;
            while (!irgl_done_3) {
              if (atomicCAS((unsigned long long *)&(dist_locks[IRGL_DST(e)]), 0ULL, 1ULL) == 0ULL) {
                __threadfence();
                if (nd < dist[IRGL_DST(e)]) {
                  dist[IRGL_DST(e)] = nd;
                  changed = true;
                }
                __threadfence();
                atomicExch((unsigned long long *)&(dist_locks[IRGL_DST(e)]), 0ULL);
                irgl_done_3 = true;
              }
            }
          }
        }
      }
      irgl_acc = irgl::red_fold<IRGL_RED>(irgl_acc, changed);
      goto irgl_next_1;
      irgl_next_1: ;
    }
  }
  irgl::red_combine<IRGL_RED>(irgl_ret, irgl_acc);
}
template __global__ void irgl_relax<IRGL_RED_ANY>(irgl::RetCell irgl_ret, irgl::CSRGraph graph);

void irgl_main(irgl::CSRGraph graph, irgl::value_t src) {
  irgl_graph = graph;
  for (irgl::value_t n = 0, irgl_end_1 = IRGL_NNODES(graph); n < irgl_end_1; n++) {
    dist[n] = IRGL_INF;
  }
  dist[src] = 0;
  rounds = 0;
  {
    bool irgl_r_2 = false;
    while (true) {
      {
        irgl::RetCell irgl_ret_3 = irgl::ret_alloc(IRGL_RED_ANY);
        const int irgl_grid_3 = irgl::sm_count() * 8;
        irgl_relax<IRGL_RED_ANY><<<irgl_grid_3, 256>>>(irgl_ret_3, graph);
        irgl::check(cudaDeviceSynchronize(), "relax");
        irgl_r_2 = irgl::ret_read(irgl_ret_3);
      }
      rounds++;
      if (!irgl_r_2) break;
    }
  }
}
