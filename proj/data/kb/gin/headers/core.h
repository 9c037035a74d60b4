#ifndef NCCL_DEVICE_CORE_H_
#define NCCL_DEVICE_CORE_H_

// Core device-communicator types shared by every device-side backend.

struct ncclWindow_t;   // registered symmetric allocation, one handle per rank
struct ncclDevComm;    // device-side communicator, built from host requirements

struct ncclTeam {
  int nRanks;
  int rank;   // index of the caller within this team
  int stride;
};

__device__ ncclTeam ncclTeamWorld(const ncclDevComm &comm);
__device__ ncclTeam ncclTeamRail(const ncclDevComm &comm);

// Host-side plumbing -------------------------------------------------------

struct ncclDevCommRequirements {
  int barrierCount;   // concurrent barrier slots the device code may use
  int signalCount;    // signal counters (network backends only)
  int lsaBarrierCount;
};

// All device-visible communication buffers come from ncclMemAlloc and are
// registered into a window before any device-side call touches them.
cudaError_t ncclMemAlloc(void **ptr, size_t bytes);
ncclResult_t ncclCommWindowRegister(ncclComm_t comm, void *ptr, size_t bytes,
                                    ncclWindow_t **win, int flags);
ncclResult_t ncclDevCommCreate(ncclComm_t comm,
                               const ncclDevCommRequirements *reqs,
                               ncclDevComm *devComm);

#endif  // NCCL_DEVICE_CORE_H_
