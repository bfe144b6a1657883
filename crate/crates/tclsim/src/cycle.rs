//! Execution-time models: the dense baseline, weight-skipping front end, and
//! the two activation-serial back ends, with activity counters.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coding::{group_cost, oneffset_count, SerialMode};
use crate::error::{Error, Result};
use crate::schedule::{
    build_dense_schedule, filter_slice, schedule_tile, DenseSchedule, PromotionPattern,
    TileSchedule,
};
use crate::tensor::{act_u16, validate_activations, LayerSpec, Tensor16};

/// Which datapath the model prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArchMode {
    /// Dense bit-parallel baseline.
    Dcnn,
    /// Weight skipping only, bit-parallel multipliers.
    TclWs,
    /// Weight skipping + precision-serial activations.
    TclP,
    /// Weight skipping + oneffset-serial activations.
    TclE,
}

impl ArchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchMode::Dcnn => "dcnn",
            ArchMode::TclWs => "tcl-ws",
            ArchMode::TclP => "tclp",
            ArchMode::TclE => "tcle",
        }
    }
}

/// Machine geometry plus the promotion pattern.
///
/// The memory capacities are carried for completeness but never influence
/// timing: activation delivery is modeled as unrestricted, so tiles never
/// stall on fetch.
#[derive(Debug, Clone, Serialize)]
pub struct ArchConfig {
    /// Weight lanes per filter (N).
    pub lanes: usize,
    /// Filters per tile (k).
    pub filters_per_tile: usize,
    pub tiles: usize,
    /// Activation windows processed in parallel by the serial back ends.
    pub windows_parallel: usize,
    pub pattern: PromotionPattern,
    pub mode: ArchMode,
    /// Optional serial-shift limit for the oneffset back end (see
    /// `coding::group_cost`).
    pub max_shift_delta: Option<u8>,
    /// Per-tile weight memory, KiB. Recorded, not modeled.
    pub weight_mem_kib: usize,
    /// Shared activation memory, KiB. Recorded, not modeled.
    pub act_mem_kib: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            lanes: 16,
            filters_per_tile: 16,
            tiles: 4,
            windows_parallel: 16,
            pattern: PromotionPattern::none(),
            mode: ArchMode::Dcnn,
            max_shift_delta: None,
            weight_mem_kib: 2048,
            act_mem_kib: 4096,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lanes < 1 || self.filters_per_tile < 1 || self.tiles < 1 {
            return Err(Error::Config(
                "lanes, filters per tile, tiles must be >= 1".into(),
            ));
        }
        if self.windows_parallel < 1 {
            return Err(Error::Config("windows_parallel must be >= 1".into()));
        }
        Ok(())
    }
}

/// Activity counters. Column/bubble counts are static schedule totals summed
/// over all filter groups; multiply by the window iterations of the run for
/// fetch events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CycleCounters {
    /// Multiplies actually issued: every MAC for dcnn, effectual-weight MACs
    /// for the TCL modes, effectual pairs for SCNN.
    pub macs_executed: u64,
    pub columns_fetched: u64,
    pub bubbles: u64,
    /// Serial broadcast volume: bits for tclP, oneffsets for tclE.
    pub activation_bits_broadcast: u64,
    /// Compute-column serial cost -> occurrence count.
    pub serial_cycles_histogram: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub cycles: u64,
    pub speedup_vs_dcnn: f64,
    pub counters: CycleCounters,
}

/// Dense baseline: every tile processes `ceil(Fx*Fy*C/n)` weight columns per
/// window for each of its filter groups.
pub fn cycles_dcnn(layer: &LayerSpec, arch: &ArchConfig) -> u64 {
    let steps = layer.filter_len().div_ceil(arch.lanes) as u64;
    let passes = layer.kk.div_ceil(arch.filters_per_tile * arch.tiles) as u64;
    passes * layer.windows() as u64 * steps
}

/// Filters are grouped by `filters_per_tile` in index order; group `g` runs
/// on tile `g mod tiles`.
fn tile_schedules(
    layer: &LayerSpec,
    weights: &Tensor16,
    arch: &ArchConfig,
) -> Result<Vec<TileSchedule>> {
    let mut groups = Vec::new();
    let mut dense: Vec<DenseSchedule> = Vec::new();
    for k in 0..layer.kk {
        let f = filter_slice(weights, layer, k)?;
        dense.push(build_dense_schedule(&f, layer, arch.lanes, k)?);
        if dense.len() == arch.filters_per_tile {
            groups.push(schedule_tile(&dense, &arch.pattern)?);
            dense.clear();
        }
    }
    if !dense.is_empty() {
        groups.push(schedule_tile(&dense, &arch.pattern)?);
    }
    Ok(groups)
}

fn effectual_macs(layer: &LayerSpec, weights: &Tensor16) -> u64 {
    let nnz = weights.data().iter().filter(|&&w| w != 0).count() as u64;
    nnz * layer.windows() as u64
}

/// Weight-skipping cycles: every window replays the compacted column
/// sequence, tiles run their filter groups back to back, and the slowest
/// tile sets the time.
pub fn cycles_tcl_ws(
    layer: &LayerSpec,
    weights: &Tensor16,
    arch: &ArchConfig,
) -> Result<CycleReport> {
    layer.validate()?;
    arch.validate()?;
    let groups = tile_schedules(layer, weights, arch)?;

    let windows = layer.windows() as u64;
    let mut per_tile = vec![0u64; arch.tiles];
    let mut counters = CycleCounters::default();
    for (g, ts) in groups.iter().enumerate() {
        per_tile[g % arch.tiles] += ts.columns.len() as u64 * windows;
        counters.columns_fetched += ts.compute_columns() as u64;
        counters.bubbles += ts.bubbles() as u64;
    }
    counters.macs_executed = effectual_macs(layer, weights);

    let cycles = per_tile.into_iter().max().unwrap_or(0);
    let dcnn = cycles_dcnn(layer, arch);
    Ok(CycleReport {
        cycles,
        speedup_vs_dcnn: dcnn as f64 / cycles as f64,
        counters,
    })
}

/// Map a dense linear index back to its `(c, fx, fy)` filter coordinate.
fn coord_of(l: usize, layer: &LayerSpec) -> (usize, usize, usize) {
    let fy = l % layer.fy;
    let rest = l / layer.fy;
    (rest / layer.fx, rest % layer.fx, fy)
}

/// Serial back-end cycles (tclP or tclE).
///
/// Windows run in groups of `windows_parallel`. Each compute column pays the
/// cost of its synchronization group: every activation addressed by the
/// lookahead window `[base, base+h]` across all lanes and all windows of the
/// group. Advance-only bubbles pay one cycle.
pub fn cycles_serial(
    layer: &LayerSpec,
    weights: &Tensor16,
    activations: &Tensor16,
    arch: &ArchConfig,
) -> Result<CycleReport> {
    let mode = match arch.mode {
        ArchMode::TclP => SerialMode::PrecisionSerial,
        ArchMode::TclE => SerialMode::OneffsetSerial,
        other => {
            return Err(Error::Config(format!(
                "cycles_serial needs a serial mode, got {}",
                other.as_str()
            )))
        }
    };
    layer.validate()?;
    arch.validate()?;
    if activations.dims() != [layer.ax, layer.ay, layer.c] {
        return Err(Error::Shape(format!(
            "activations dims {:?}, layer wants {:?}",
            activations.dims(),
            [layer.ax, layer.ay, layer.c]
        )));
    }
    validate_activations(layer, activations)?;

    let groups = tile_schedules(layer, weights, arch)?;
    let (ox, oy) = (layer.out_x(), layer.out_y());
    let windows: Vec<(usize, usize)> = (0..ox)
        .flat_map(|wx| (0..oy).map(move |wy| (wx, wy)))
        .collect();
    let acts = activations.data();
    let (ay, c, s) = (layer.ay, layer.c, layer.stride);
    let filter_len = layer.filter_len();
    let h = arch.pattern.lookahead();
    let cap = layer.precision_bits;

    // Activation values per dense position, precomputed per window.
    // dense position l -> (c, fx, fy) -> a(wx*s+fx, wy*s+fy, c)
    let coords: Vec<(usize, usize, usize)> = (0..filter_len).map(|l| coord_of(l, layer)).collect();

    let mut per_tile = vec![0u64; arch.tiles];
    let mut counters = CycleCounters::default();
    let mut group_vals: Vec<u16> = Vec::new();
    for (g, ts) in groups.iter().enumerate() {
        counters.columns_fetched += ts.compute_columns() as u64;
        counters.bubbles += ts.bubbles() as u64;
        let mut tile_cycles = 0u64;
        for wgroup in windows.chunks(arch.windows_parallel) {
            for col in &ts.columns {
                if col.is_bubble() {
                    tile_cycles += 1;
                    continue;
                }
                group_vals.clear();
                let last = (col.base + h).min(ts.steps - 1);
                for step in col.base..=last {
                    for lane in 0..ts.lanes {
                        let l = step * ts.lanes + lane;
                        if l >= filter_len {
                            continue; // padding beyond the filter
                        }
                        let (ch, fx, fy) = coords[l];
                        for &(wx, wy) in wgroup {
                            let idx = ((wx * s + fx) * ay + (wy * s + fy)) * c + ch;
                            group_vals.push(act_u16(acts[idx]));
                        }
                    }
                }
                let cost = group_cost(&group_vals, mode, cap, arch.max_shift_delta)?.cycles;
                tile_cycles += cost as u64;
                *counters.serial_cycles_histogram.entry(cost).or_insert(0) += 1;
                match mode {
                    SerialMode::PrecisionSerial => {
                        counters.activation_bits_broadcast += cost as u64 * group_vals.len() as u64;
                    }
                    SerialMode::OneffsetSerial => {
                        counters.activation_bits_broadcast += group_vals
                            .iter()
                            .map(|&v| oneffset_count(v) as u64)
                            .sum::<u64>();
                    }
                }
            }
        }
        per_tile[g % arch.tiles] += tile_cycles;
    }
    counters.macs_executed = effectual_macs(layer, weights);

    let cycles = per_tile.into_iter().max().unwrap_or(0);
    let dcnn = cycles_dcnn(layer, arch);
    Ok(CycleReport {
        cycles,
        speedup_vs_dcnn: dcnn as f64 / cycles as f64,
        counters,
    })
}

/// Price one layer under `arch.mode`. Activations are only consulted by the
/// serial modes.
pub fn simulate_layer(
    layer: &LayerSpec,
    weights: &Tensor16,
    activations: Option<&Tensor16>,
    arch: &ArchConfig,
) -> Result<CycleReport> {
    match arch.mode {
        ArchMode::Dcnn => {
            layer.validate()?;
            arch.validate()?;
            let steps = layer.filter_len().div_ceil(arch.lanes) as u64;
            let cycles = cycles_dcnn(layer, arch);
            let groups = layer.kk.div_ceil(arch.filters_per_tile) as u64;
            Ok(CycleReport {
                cycles,
                speedup_vs_dcnn: 1.0,
                counters: CycleCounters {
                    macs_executed: layer.total_macs(),
                    columns_fetched: groups * steps,
                    ..CycleCounters::default()
                },
            })
        }
        ArchMode::TclWs => cycles_tcl_ws(layer, weights, arch),
        ArchMode::TclP | ArchMode::TclE => {
            let acts = activations.ok_or_else(|| {
                Error::Config(format!("{} needs activations", arch.mode.as_str()))
            })?;
            cycles_serial(layer, weights, acts, arch)
        }
    }
}
