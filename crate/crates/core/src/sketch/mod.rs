//! Partitioned streaming sketches (Khatri-Rao DRMs, owner maps, tree QR
//! bases) and the counters that track their cost.

pub mod contract;
pub mod counters;
pub mod drm;
pub mod engine;
pub mod partition;

pub use counters::{Charge, CostCounters, CounterSnapshot};
pub use drm::{DrmKind, KhatriRaoDrm};
pub use engine::{
    apply_kr_drm, extract_subtensor, parallel_multi_sketch, Basis, BlockSource, BlockedTensor, Contraction,
    OracleSource, SketchAccumulator, SketchEngine,
};
pub use partition::{chunk_bounds, owner_map, Partition, SubTensorRef};
