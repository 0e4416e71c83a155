// Generated by irglc from module `dmr`.
#include "irgl_runtime.cuh"

__managed__ irgl::Array fresh;
__managed__ irgl::value_t nbad = 0;

__global__ void irgl_identify_bad_triangles(irgl::PipeContext *irgl_wl, irgl::Array mesh) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = IRGL_LEN(mesh);
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t t = irgl_idx_1;
      if (mesh[t] > 0) {
        irgl_wl->out->push(t);
      }
    }
  }
}

__global__ void __launch_bounds__(256) irgl_refine(irgl::PipeContext *irgl_wl, irgl::GlobalBarrier irgl_bar, irgl::Array mesh) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  irgl::value_t bad_triangle = 0;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = irgl_wl->in->size();
    for (irgl::value_t irgl_base_1 = irgl_begin_1; irgl_base_1 < irgl_end_1; irgl_base_1 += irgl_nthreads) {
      const irgl::value_t irgl_idx_1 = irgl_base_1 + irgl_tid;
      bool irgl_active = irgl_idx_1 < irgl_end_1;
      irgl::value_t btidx = irgl_idx_1;
      if (irgl_active) {
        bad_triangle = irgl_wl->in->pop(btidx);
      }
      {
        volatile unsigned int *irgl_slots_3 = IRGL_EXCL_SLOTS(mesh);
        const unsigned int irgl_prio_3 = (unsigned int)irgl_tid;
        const irgl::value_t irgl_nlocks_3 = irgl_active ? irgl::min_of((irgl::value_t)(2), (irgl::value_t)((irgl::min_of(bad_triangle + 2, IRGL_LEN(mesh))) - bad_triangle)) : 0;
        for (irgl::value_t irgl_j_3 = 0; irgl_j_3 < irgl_nlocks_3; irgl_j_3++) {
          irgl_slots_3[bad_triangle + irgl_j_3] = irgl_prio_3;
        }
        irgl::barrier_sync(irgl_bar);
        for (irgl::value_t irgl_j_3 = 0; irgl_j_3 < irgl_nlocks_3; irgl_j_3++) {
          const unsigned int irgl_owner_3 = irgl_slots_3[bad_triangle + irgl_j_3];
          if (irgl_owner_3 != irgl_prio_3 && irgl_prio_3 < irgl_owner_3) {
            atomicMin((unsigned int *)&irgl_slots_3[bad_triangle + irgl_j_3], irgl_prio_3);
          }
        }
        irgl::barrier_sync(irgl_bar);
        bool irgl_won_3 = irgl_active;
        for (irgl::value_t irgl_j_3 = 0; irgl_j_3 < irgl_nlocks_3; irgl_j_3++) {
          if (irgl_slots_3[bad_triangle + irgl_j_3] != irgl_prio_3) irgl_won_3 = false;
        }
        irgl::barrier_sync(irgl_bar);
        for (irgl::value_t irgl_j_3 = 0; irgl_j_3 < irgl_nlocks_3; irgl_j_3++) {
          irgl_slots_3[bad_triangle + irgl_j_3] = IRGL_UNCLAIMED;
        }
        if (irgl_active) {
          if (irgl_won_3) {
            mesh[bad_triangle] = mesh[bad_triangle] - 1;
            fresh[bad_triangle] = 1;
          } else {
            irgl_wl->retry->push(bad_triangle);
          }
        }
      }
      irgl::barrier_sync(irgl_bar);
    }
  }
}

__global__ void irgl_incremental_id_bad_triangles(irgl::PipeContext *irgl_wl, irgl::Array mesh) {
  const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;
  const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;
  {
    const irgl::value_t irgl_begin_1 = 0, irgl_end_1 = IRGL_LEN(mesh);
    for (irgl::value_t irgl_idx_1 = irgl_begin_1 + irgl_tid; irgl_idx_1 < irgl_end_1; irgl_idx_1 += irgl_nthreads) {
      irgl::value_t t = irgl_idx_1;
      if (fresh[t] == 1) {
        fresh[t] = 0;
        if (mesh[t] > 0) {
          irgl_wl->out->push(t);
        }
      }
    }
  }
}

void irgl_main(irgl::Array mesh) {
  fresh = zeros(IRGL_LEN(mesh));
  nbad = 0;
  for (irgl::value_t t = 0, irgl_end_1 = IRGL_LEN(mesh); t < irgl_end_1; t++) {
    if (mesh[t] > 0) {
      nbad = nbad + 1;
    }
  }
  {
    irgl::HostPipe irgl_pipe_2(IRGL_DEFAULT_WL_SIZE);
    {
      const int irgl_grid_3 = irgl::sm_count() * 8;
      irgl_identify_bad_triangles<<<irgl_grid_3, 1024>>>(irgl_pipe_2.ctx, mesh);
      irgl::check(cudaDeviceSynchronize(), "identify_bad_triangles");
      irgl_pipe_2.swap_in_out();
    }
    printf("initial bad: %lld\n", nbad);
    {
      while (irgl_pipe_2.in_size() > 0) {
        {
          int irgl_bps_4 = 0;
          irgl::check(cudaOccupancyMaxActiveBlocksPerMultiprocessor(&irgl_bps_4, irgl_refine, 256, 0), "occupancy");
          const int irgl_grid_4 = irgl_bps_4 * irgl::sm_count();
          irgl::GlobalBarrier irgl_bar_4 = irgl::barrier_alloc(irgl_grid_4);
          // Retried items are re-launched as they are; conflict management is left to the program.
          while (true) {
            irgl_refine<<<irgl_grid_4, 256>>>(irgl_pipe_2.ctx, irgl_bar_4, mesh);
            irgl::check(cudaDeviceSynchronize(), "refine");
            if (irgl_pipe_2.retry_size() == 0) break;
            irgl_pipe_2.swap_in_retry();
          }
          irgl::barrier_free(irgl_bar_4);
          irgl_pipe_2.swap_in_out();
        }
        {
          const int irgl_grid_5 = irgl::sm_count() * 8;
          irgl_incremental_id_bad_triangles<<<irgl_grid_5, 1024>>>(irgl_pipe_2.ctx, mesh);
          irgl::check(cudaDeviceSynchronize(), "incremental_id_bad_triangles");
          irgl_pipe_2.swap_in_out();
        }
      }
    }
    {
      const int irgl_grid_6 = irgl::sm_count() * 8;
      irgl_identify_bad_triangles<<<irgl_grid_6, 1024>>>(irgl_pipe_2.ctx, mesh);
      irgl::check(cudaDeviceSynchronize(), "identify_bad_triangles");
      irgl_pipe_2.swap_in_out();
    }
    nbad = 0;
    for (irgl::value_t t = 0, irgl_end_7 = IRGL_LEN(mesh); t < irgl_end_7; t++) {
      if (mesh[t] > 0) {
        nbad = nbad + 1;
      }
    }
    printf("final bad: %lld\n", nbad);
  }
}
