// Reference: device-initiated intra-node AllToAll over LSA. Each rank
// stores its contribution directly into every peer's landing window, then
// publishes with a release-ordered barrier sync.

#include <cuda/atomic>
#include <cuda_runtime.h>
#include <nccl.h>

#include "coop.h"
#include "core.h"
#include "lsa.h"

__global__ void alltoall_lsa(ncclDevComm comm, ncclWindow_t *winRecv,
                             const float *src, size_t perRank) {
  ncclTeam local = ncclTeamLsa(comm);
  int rank = local.rank, n = local.nRanks;
  ncclLsaBarrierSession bar(comm, local, blockIdx.x);

  for (int step = 0; step < n; ++step) {
    int peer = (rank + step) % n;
    float *dst = (float *)ncclGetLsaPointer(winRecv, rank * perRank *
                                            sizeof(float), peer);
    for (size_t i = threadIdx.x; i < perRank; i += blockDim.x)
      dst[i] = src[peer * perRank + i];
  }

  // Publish the stores, then wait until every peer has published.
  bar.sync(ncclCoopCta(), cuda::memory_order_release);
  // Own landing window is now consistent; read via ncclGetLocalPointer.
  float *mine = (float *)ncclGetLocalPointer(winRecv, 0);
  (void)mine;
}

// Host-side setup sketch (stage-A shape):
//   void *recv;
//   ncclMemAlloc(&recv, bytes);
//   ncclCommWindowRegister(comm, recv, bytes, &winRecv, 0);
//   ncclDevCommRequirements reqs = {.lsaBarrierCount = gridDim};
//   ncclDevCommCreate(comm, &reqs, &devComm);
//   alltoall_lsa<<<grid, 256>>>(devComm, winRecv, src, perRank);
