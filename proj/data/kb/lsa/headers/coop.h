#ifndef NCCL_DEVICE_COOP_H_
#define NCCL_DEVICE_COOP_H_

// Cooperative thread groups naming who issues a device-side call.
// The completion call (wait/flush/sync) must use the same group that
// issued the operations it completes.

struct ncclCoopThread {};  // calling thread alone
struct ncclCoopWarp {};    // converged warp (32 threads)
struct ncclCoopCta {};     // every thread of the block

#endif  // NCCL_DEVICE_COOP_H_
