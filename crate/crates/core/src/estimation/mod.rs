//! Nonparametric estimation of the indexed kernel and of the follower's
//! sign-conditioned one-step law, with tiered backoff for sparse contexts.

mod fallback;
mod follower;
mod kernel;

pub use fallback::{
    query_follower_with_fallback, query_with_fallback, sign_sensitive, FallbackTier,
    FollowerFallback, KernelFallback, TierStats, DEFAULT_MIN_COUNT,
};
pub use follower::{estimate_follower, ContextRow, FollowerContext, FollowerIndexAt, FollowerKernel};
pub use kernel::{count_sojourns, estimate_kernel, KernelCounts};
