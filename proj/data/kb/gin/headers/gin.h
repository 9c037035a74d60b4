#ifndef NCCL_DEVICE_GIN_H_
#define NCCL_DEVICE_GIN_H_

#include "coop.h"
#include "core.h"

// GPU-initiated networking: one-sided puts with remote signal increments.
// Obtain the handle from the device communicator: ncclGin gin(devComm);

struct ncclGin {
  __device__ explicit ncclGin(const ncclDevComm &comm);

  // One-sided transfer of `bytes` from the local window into `peer`'s
  // window, then increment remote signal `sig`. Unordered until flush.
  template <typename Coop>
  __device__ void put(ncclTeam team, int peer, ncclWindow_t *dstWin,
                      size_t dstOff, ncclWindow_t *srcWin, size_t srcOff,
                      size_t bytes, int sig);

  // Blocks the group until this rank's counter `sig` reaches `count`.
  template <typename Coop>
  __device__ void waitSignal(Coop group, int sig, unsigned count);

  // Source-side completion: after return, every source buffer of puts
  // issued by this group may be reused.
  template <typename Coop>
  __device__ void flush(Coop group);
};

#endif  // NCCL_DEVICE_GIN_H_
