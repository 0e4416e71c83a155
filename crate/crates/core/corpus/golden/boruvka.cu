// Generated by irglc from module `boruvka`.
#include "irgl_runtime.cuh"

__managed__ irgl::Array components;
__managed__ irgl::Array component_minwt;
__managed__ irgl::Array component_minedge;
__managed__ irgl::Array component_locks;
__managed__ irgl::Array parent;
__managed__ irgl::Array all_nodes;
__managed__ irgl::value_t mst_weight = 0;

__global__ void irgl_find_min_edge(irgl::PipeContext *irgl_wl, irgl::CSRGraph graph) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  irgl::value_t n = 0;
  irgl::value_t n_component = 0;
  irgl::value_t minwt = 0;
  irgl::value_t minedge = 0;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = irgl_wl->in->size();
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t nidx = irgl_idx_1;
      n = irgl_wl->in->pop(nidx);
      n_component = components[n];
      minwt = IRGL_INF;
      minedge = -1;
      for (irgl::value_t e = IRGL_EDGE_BEGIN(graph, n), irgl_end_2 = IRGL_EDGE_END(graph, n); e < irgl_end_2; e++) {
        if (components[IRGL_DST(e)] != n_component && IRGL_WEIGHT(e) < minwt) {
          minwt = IRGL_WEIGHT(e);
          minedge = e;
        }
      }
      {
        bool irgl_done_3 = false;
        while (!irgl_done_3) {
          if (atomicCAS((unsigned long long *)&(component_locks[n_component]), 0ULL, 1ULL) == 0ULL) {
            __threadfence();
            if (component_minwt[n_component] > minwt) {
              component_minwt[n_component] = minwt;
              component_minedge[n_component] = minedge;
            }
            __threadfence();
            atomicExch((unsigned long long *)&(component_locks[n_component]), 0ULL);
            irgl_done_3 = true;
          }
        }
      }
      if (minwt != IRGL_INF) {
        irgl_wl->out->push(n);
      }
    }
  }
}

void irgl_main(irgl::CSRGraph graph) {
  irgl_graph = graph;
  irgl::value_t e = 0;
  irgl::value_t ra = 0;
  irgl::value_t rb = 0;
  irgl::value_t r = 0;
  for (irgl::value_t n = 0, irgl_end_1 = IRGL_NNODES(graph); n < irgl_end_1; n++) {
    components[n] = n;
    parent[n] = n;
    component_minwt[n] = IRGL_INF;
    all_nodes[n] = n;
  }
  mst_weight = 0;
  {
    irgl::HostPipe irgl_pipe_2(IRGL_DEFAULT_WL_SIZE);
    irgl_pipe_2.init_from_array(all_nodes, IRGL_NNODES(graph));
    while (irgl_pipe_2.in_size() > 0) {
      {
        const int irgl_grid_3 = irgl::sm_count() * 8;
        irgl_find_min_edge<<<irgl_grid_3, 1024>>>(irgl_pipe_2.ctx, graph);
        irgl::check(cudaDeviceSynchronize(), "find_min_edge");
        irgl_pipe_2.swap_in_out();
      }
      for (irgl::value_t c = 0, irgl_end_4 = IRGL_NNODES(graph); c < irgl_end_4; c++) {
        if (components[c] == c && component_minwt[c] != IRGL_INF) {
          e = component_minedge[c];
          ra = IRGL_SRC(e);
          while (parent[ra] != ra) {
            ra = parent[ra];
          }
          rb = IRGL_DST(e);
          while (parent[rb] != rb) {
            rb = parent[rb];
          }
          if (ra != rb) {
            parent[ra] = rb;
            mst_weight = mst_weight + IRGL_WEIGHT(e);
          }
        }
      }
      for (irgl::value_t n = 0, irgl_end_5 = IRGL_NNODES(graph); n < irgl_end_5; n++) {
        r = n;
        while (parent[r] != r) {
          r = parent[r];
        }
        components[n] = r;
        component_minwt[n] = IRGL_INF;
      }
    }
  }
}
