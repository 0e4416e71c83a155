//! The CUDA runtime support emitted ahead of generated kernels, either inline
//! or as a separate header.

pub const HEADER_NAME: &str = "irgl_runtime.cuh";

pub const RUNTIME: &str = r#"// IrGL runtime support.
#include <cstdio>
#include <cstdlib>
#include <cuda_runtime.h>

#define IRGL_INF 9223372036854775807LL
#define IRGL_UNCLAIMED 0xffffffffu
#define IRGL_DEFAULT_WL_SIZE (1 << 22)

#define IRGL_RED_NONE 0
#define IRGL_RED_ANY 1
#define IRGL_RED_ALL 2

// Graph accessors. Edge fields resolve against the program's graph, which
// host code installs in irgl_graph before any launch.
#define IRGL_EDGE_BEGIN(g, n) ((g).row_start[(n)])
#define IRGL_EDGE_END(g, n) ((g).row_start[(n) + 1])
#define IRGL_NNODES(g) ((g).nnodes)
#define IRGL_NEDGES(g) ((g).nedges)
#define IRGL_DST(e) (irgl_graph.edge_dst[(e)])
#define IRGL_SRC(e) (irgl_graph.edge_src[(e)])
#define IRGL_WEIGHT(e) (irgl_graph.edge_weight[(e)])
#define IRGL_LEN(a) ((a).len)

// Objects named by Exclusive expose one lock slot per element, initialized
// to IRGL_UNCLAIMED.
#define IRGL_EXCL_SLOTS(obj) ((obj).lock_slots)

namespace irgl {

typedef long long value_t;

struct Array {
  value_t *data;
  value_t len;
  unsigned int *lock_slots;
  __host__ __device__ value_t &operator[](value_t i) const { return data[i]; }
};

struct CSRGraph {
  value_t nnodes;
  value_t nedges;
  value_t *row_start;
  value_t *edge_src;
  value_t *edge_dst;
  value_t *edge_weight;
  unsigned int *lock_slots;
};

template <class T> __host__ __device__ T min_of(T a, T b) { return a < b ? a : b; }
template <class T> __host__ __device__ T max_of(T a, T b) { return a < b ? b : a; }
template <class T> __host__ __device__ T abs_of(T a) { return a < 0 ? -a : a; }

inline void check(cudaError_t e, const char *what) {
  if (e != cudaSuccess) {
    fprintf(stderr, "irgl: %s: %s\n", what, cudaGetErrorString(e));
    exit(1);
  }
}

// A single array and a counter. Pushes claim a slot with one atomicAdd each.
// A launch pops from `in` and pushes to `out`, so pushed items only become
// visible once the host swaps the two lists between launches.
struct Worklist {
  value_t *items;
  unsigned long long *count;
  unsigned long long capacity;

  __device__ void push(value_t item) const {
    unsigned long long slot = atomicAdd(count, 1ULL);
    if (slot >= capacity) {
      printf("irgl: worklist overflow\n");
      __trap();
    }
    items[slot] = item;
  }
  __host__ __device__ value_t pop(value_t index) const { return items[index]; }
  __host__ __device__ value_t size() const { return (value_t)*count; }
  __host__ __device__ void clear() const { *count = 0; }
};

struct PipeContext {
  Worklist *in;
  Worklist *out;
  Worklist *retry;
};

inline Worklist *worklist_alloc(value_t capacity) {
  Worklist *w;
  check(cudaMallocManaged(&w, sizeof(Worklist)), "worklist");
  check(cudaMallocManaged(&w->items, sizeof(value_t) * capacity), "worklist items");
  check(cudaMallocManaged(&w->count, sizeof(unsigned long long)), "worklist count");
  *w->count = 0;
  w->capacity = capacity;
  return w;
}

inline void worklist_free(Worklist *w) {
  cudaFree(w->items);
  cudaFree(w->count);
  cudaFree(w);
}

// The in/out/retry triple owned by an outermost Pipe or Iterate.
struct HostPipe {
  PipeContext *ctx;
  explicit HostPipe(value_t capacity) {
    check(cudaMallocManaged(&ctx, sizeof(PipeContext)), "pipe");
    ctx->in = worklist_alloc(capacity);
    ctx->out = worklist_alloc(capacity);
    ctx->retry = worklist_alloc(capacity);
  }
  ~HostPipe() {
    worklist_free(ctx->in);
    worklist_free(ctx->out);
    worklist_free(ctx->retry);
    cudaFree(ctx);
  }
  value_t in_size() const { return ctx->in->size(); }
  value_t retry_size() const { return ctx->retry->size(); }
  void push_in(value_t item) {
    if (*ctx->in->count >= ctx->in->capacity) {
      fprintf(stderr, "irgl: worklist initializer overflow\n");
      exit(1);
    }
    ctx->in->items[(*ctx->in->count)++] = item;
  }
  void init_from_array(const Array &a, value_t n) {
    for (value_t i = 0; i < n; i++) push_in(a[i]);
  }
  // After a launch: what was pushed becomes the input; out starts empty.
  void swap_in_out() {
    Worklist *t = ctx->in;
    ctx->in = ctx->out;
    ctx->out = t;
    ctx->out->clear();
  }
  // Before a re-run: retried items become the input; out is left alone.
  void swap_in_retry() {
    Worklist *t = ctx->in;
    ctx->in = ctx->retry;
    ctx->retry = t;
    ctx->retry->clear();
  }
};

// Device-wide barrier after Merrill's GPU-wide synchronization: thread 0 of
// each block arrives on a global counter; the last arrival resets it and
// bumps the generation everyone else spins on. Only safe when every block is
// resident, so launches of barrier-using kernels size their grid with the
// occupancy API.
struct GlobalBarrier {
  unsigned int *count;
  volatile unsigned int *generation;
  unsigned int nblocks;
};

__device__ inline void barrier_sync(GlobalBarrier b) {
  __syncthreads();
  if (threadIdx.x == 0) {
    unsigned int gen = *b.generation;
    __threadfence();
    if (atomicAdd(b.count, 1u) == b.nblocks - 1) {
      *b.count = 0;
      __threadfence();
      *b.generation = gen + 1;
    } else {
      while (*b.generation == gen) {
      }
    }
    __threadfence();
  }
  __syncthreads();
}

inline GlobalBarrier barrier_alloc(unsigned int nblocks) {
  GlobalBarrier b;
  unsigned int *gen;
  check(cudaMallocManaged(&b.count, sizeof(unsigned int)), "barrier");
  check(cudaMallocManaged(&gen, sizeof(unsigned int)), "barrier");
  *b.count = 0;
  *gen = 0;
  b.generation = gen;
  b.nblocks = nblocks;
  return b;
}

inline void barrier_free(GlobalBarrier b) {
  cudaFree(b.count);
  cudaFree((void *)b.generation);
}

inline int sm_count() {
  int dev = 0, n = 0;
  check(cudaGetDevice(&dev), "device");
  check(cudaDeviceGetAttribute(&n, cudaDevAttrMultiProcessorCount, dev), "SM count");
  return n;
}

// Pipe operations for outlined control kernels; every thread calls them.
__device__ inline void device_swap_in_out(PipeContext *c, GlobalBarrier b) {
  barrier_sync(b);
  if (blockIdx.x == 0 && threadIdx.x == 0) {
    Worklist *t = c->in;
    c->in = c->out;
    c->out = t;
    c->out->clear();
  }
  barrier_sync(b);
}

__device__ inline void device_swap_in_retry(PipeContext *c, GlobalBarrier b) {
  barrier_sync(b);
  if (blockIdx.x == 0 && threadIdx.x == 0) {
    Worklist *t = c->in;
    c->in = c->retry;
    c->retry = t;
    c->retry->clear();
  }
  barrier_sync(b);
}

// Return-value cell of a reducing launch: 0 for Any and 1 for All before the
// launch, so a launch with no ReduceAndReturn yields the identity.
struct RetCell {
  int *value;
};

inline RetCell ret_alloc(int red) {
  RetCell c;
  check(cudaMallocManaged(&c.value, sizeof(int)), "return cell");
  *c.value = red == IRGL_RED_ALL ? 1 : 0;
  return c;
}

inline bool ret_read(RetCell c) {
  bool v = *c.value != 0;
  cudaFree(c.value);
  return v;
}

template <int R> __device__ bool red_identity() { return R == IRGL_RED_ALL; }

template <int R> __device__ bool red_fold(bool acc, bool v) {
  return R == IRGL_RED_ALL ? (acc && v) : (acc || v);
}

// One atomic per block into the launch's cell.
template <int R> __device__ void red_combine(RetCell c, bool acc) {
  if (R == IRGL_RED_ANY) {
    int r = __syncthreads_or(acc);
    if (threadIdx.x == 0 && r) atomicOr(c.value, 1);
  } else if (R == IRGL_RED_ALL) {
    int r = __syncthreads_and(acc);
    if (threadIdx.x == 0 && !r) atomicAnd(c.value, 0);
  }
}

}  // namespace irgl

__managed__ irgl::CSRGraph irgl_graph;
"#;
