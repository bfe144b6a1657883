//! Timing models for sparsity-exploiting CNN inference accelerators.
//!
//! The crate builds static weight schedules for a lookahead/lookaside
//! promotion front end, prices them against a dense bit-parallel baseline,
//! and layers two bit-serial activation back ends on top: precision-serial
//! (`tclp`) and oneffset-serial (`tcle`). Around that core sit an
//! ineffectual-work potential analysis, a Cartesian-product comparator model
//! (`scnn`), a greedy promotion-pattern search, and a small CLI with a binary
//! tensor format (TCLT) and JSON network manifests.
//!
//! Everything is deterministic: same inputs, same bytes out.

pub mod cli;
pub mod coding;
pub mod cycle;
pub mod error;
pub mod manifest;
pub mod potential;
pub mod report;
pub mod schedule;
pub mod scnn;
pub mod search;
pub mod tensor;

pub use coding::{group_cost, needed_bits, oneffset_count, oneffsets, GroupCost, SerialMode};
pub use cycle::{
    cycles_dcnn, cycles_serial, cycles_tcl_ws, simulate_layer, ArchConfig, ArchMode, CycleCounters,
    CycleReport,
};
pub use error::{Error, Result};
pub use manifest::{GeneratorSpec, Manifest, ManifestLayer, ResolvedLayer};
pub use potential::{ideal_speedups, PotentialReport, Speedup};
pub use report::{render_network_csv, simulate_network, NetworkReport, ReportRow, SimArch};
pub use schedule::{
    build_dense_schedule, decode_schedule, filter_slice, schedule_tile, DenseSchedule,
    PromotionPattern, PromotionSite, TileSchedule,
};
pub use scnn::{partition_stride_groups, simulate_scnn, ScnnConfig, StrideGroup};
pub use search::{checkers_pattern, full_window_pattern, greedy_prune_search, SearchTrace};
pub use tensor::{
    dense_conv, gen_synthetic, load_tensor, save_tensor, LayerSpec, Tensor, Tensor16, ValueModel,
};
