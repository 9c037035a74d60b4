// Reference: device-initiated AllToAll over GIN, barrier-delimited phases.
// Conservative by construction: CTA-scope issue, one coarse transfer per
// peer, global wait before compute touches the landing window.

#include <cuda_runtime.h>
#include <nccl.h>

#include "coop.h"
#include "core.h"
#include "gin.h"

#define SIG_ALLTOALL 0

__global__ void alltoall_gin(ncclDevComm comm, ncclWindow_t *winSend,
                             ncclWindow_t *winRecv, size_t perRank) {
  ncclGin gin(comm);
  ncclTeam world = ncclTeamWorld(comm);
  int rank = world.rank, n = world.nRanks;

  // Phase 1: one put per peer, whole slot, remote signal increment.
  for (int step = 1; step < n; ++step) {
    int peer = (rank + step) % n;
    gin.put(world, peer, winRecv, rank * perRank, winSend, peer * perRank,
            perRank, SIG_ALLTOALL);
  }
  // Local slot moves by plain copy through the local mapping.

  // Phase 2: source-side completion, then wait for all peers' deliveries.
  gin.flush(ncclCoopCta());
  gin.waitSignal(ncclCoopCta(), SIG_ALLTOALL, n - 1);
  __syncthreads();
  // Landing window is now consistent; compute may read winRecv.
}

// Host-side setup sketch (stage-A shape):
//   void *send, *recv;
//   ncclMemAlloc(&send, bytes); ncclMemAlloc(&recv, bytes);
//   ncclCommWindowRegister(comm, send, bytes, &winSend, 0);
//   ncclCommWindowRegister(comm, recv, bytes, &winRecv, 0);
//   ncclDevCommRequirements reqs = {.barrierCount = 1, .signalCount = 1};
//   ncclDevCommCreate(comm, &reqs, &devComm);
//   alltoall_gin<<<1, 256>>>(devComm, winSend, winRecv, perRank);
