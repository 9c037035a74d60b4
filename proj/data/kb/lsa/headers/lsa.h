#ifndef NCCL_DEVICE_LSA_H_
#define NCCL_DEVICE_LSA_H_

#include <cuda/atomic>

#include "coop.h"
#include "core.h"

// Load/store-accessible peers: direct access to window mappings of ranks
// inside the local team, synchronized by barrier sessions.

__device__ ncclTeam ncclTeamLsa(const ncclDevComm &comm);

// Resolves the locally-mapped address of `peer`'s window at `offset`.
// `peer` is an ncclTeamLsa-relative index.
__device__ void *ncclGetLsaPointer(ncclWindow_t *win, size_t offset, int peer);

// Local rank's own mapping (equivalent to peer == team.rank).
__device__ void *ncclGetLocalPointer(ncclWindow_t *win, size_t offset);

// One barrier slot per concurrently running CTA; construct with blockIdx.x.
struct ncclLsaBarrierSession {
  __device__ ncclLsaBarrierSession(const ncclDevComm &comm, ncclTeam team,
                                   unsigned index);

  // Arrive + wait across the team. The memory order applies to the caller's
  // preceding stores (release) / subsequent loads (acquire).
  template <typename Coop>
  __device__ void sync(Coop group, cuda::memory_order order);
};

#endif  // NCCL_DEVICE_LSA_H_
