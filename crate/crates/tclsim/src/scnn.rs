//! Cycle model of the SCNN-style comparator: an 8x8 PE grid, activations
//! tiled over x/y, 4x4 Cartesian products per PE and cycle, products resolved
//! into 32 accumulator banks (conflicts stall), halo partial sums exchanged
//! with grid neighbors.

use std::collections::BTreeMap;

use crate::cycle::{cycles_dcnn, ArchConfig, CycleCounters, CycleReport};
use crate::error::{Error, Result};
use crate::tensor::{LayerSpec, Tensor16};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScnnConfig {
    pub pe_grid_x: usize,
    pub pe_grid_y: usize,
    /// Nonzero weights consumed per cycle (the F side of the FxI product).
    pub weights_per_cycle: usize,
    /// Nonzero activations consumed per cycle (the I side).
    pub acts_per_cycle: usize,
    pub accumulator_banks: usize,
    /// Partial sums a PE can push to each neighbor per cycle.
    pub halo_sends_per_cycle: usize,
}

impl Default for ScnnConfig {
    /// 8x8 PEs x 16 multipliers = 1024, matching the default dense machine.
    fn default() -> Self {
        ScnnConfig {
            pe_grid_x: 8,
            pe_grid_y: 8,
            weights_per_cycle: 4,
            acts_per_cycle: 4,
            accumulator_banks: 32,
            halo_sends_per_cycle: 1,
        }
    }
}

impl ScnnConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("peGridX", self.pe_grid_x),
            ("peGridY", self.pe_grid_y),
            ("weightsPerCycle", self.weights_per_cycle),
            ("actsPerCycle", self.acts_per_cycle),
            ("accumulatorBanks", self.accumulator_banks),
            ("haloSendsPerCycle", self.halo_sends_per_cycle),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Config(format!("scnn {name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn multipliers(&self) -> usize {
        self.pe_grid_x * self.pe_grid_y * self.weights_per_cycle * self.acts_per_cycle
    }
}

/// One residue class of a strided layer: the weight taps and activation
/// positions whose x/y phases match, so every product stays inside the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrideGroup {
    pub phase_x: usize,
    pub phase_y: usize,
    /// (fx, fy) taps with fx = phase_x, fy = phase_y (mod stride).
    pub weight_positions: Vec<(usize, usize)>,
    /// (x, y) map positions with the same phases.
    pub act_positions: Vec<(usize, usize)>,
}

/// Split a layer into stride*stride phase groups (one group for stride 1).
/// The groups partition the valid (weight, activation) pairs exactly.
pub fn partition_stride_groups(layer: &LayerSpec) -> Vec<StrideGroup> {
    let s = layer.stride;
    let mut groups = Vec::with_capacity(s * s);
    for px in 0..s {
        for py in 0..s {
            let mut weight_positions = Vec::new();
            for fx in (px..layer.fx).step_by(s) {
                for fy in (py..layer.fy).step_by(s) {
                    weight_positions.push((fx, fy));
                }
            }
            let mut act_positions = Vec::new();
            for x in (px..layer.ax).step_by(s) {
                for y in (py..layer.ay).step_by(s) {
                    act_positions.push((x, y));
                }
            }
            groups.push(StrideGroup {
                phase_x: px,
                phase_y: py,
                weight_positions,
                act_positions,
            });
        }
    }
    groups
}

/// Balanced tiling: coordinate v of an extent-`len` axis belongs to PE slice
/// `i` iff floor(i*len/grid) <= v < floor((i+1)*len/grid).
fn owner_map(len: usize, grid: usize) -> Vec<usize> {
    let mut owner = vec![0; len];
    for i in 0..grid {
        let lo = i * len / grid;
        let hi = (i + 1) * len / grid;
        for v in owner.iter_mut().take(hi).skip(lo) {
            *v = i;
        }
    }
    owner
}

/// Run the SCNN model over one layer. Per PE and input channel the nonzero
/// activations of each stride group meet the group's nonzero weights in
/// `weights_per_cycle x acts_per_cycle` chunks; a chunk costs the worst
/// per-bank collision count among its in-range products (min 1). Halo partial
/// sums drain at `halo_sends_per_cycle` per existing grid neighbor, overlapped
/// with the PE's own compute. The report's speedup is measured against the
/// default dense machine, which has the same multiplier count.
///
/// Counters: `macs_executed` = effectual in-range products, `columns_fetched`
/// = chunks issued, `bubbles` = non-overlapped halo cycles, histogram = chunk
/// costs. Broadcast bits are not modeled for this machine and read zero.
pub fn simulate_scnn(
    layer: &LayerSpec,
    weights: &Tensor16,
    activations: &Tensor16,
    cfg: &ScnnConfig,
) -> Result<CycleReport> {
    layer.validate()?;
    cfg.validate()?;
    if layer.is_fully_connected() {
        return Err(Error::Config(
            "scnn model covers convolutional layers only (fully-connected excluded)".into(),
        ));
    }
    let wdims = [layer.kk, layer.fx, layer.fy, layer.c];
    if weights.dims() != wdims {
        return Err(Error::Shape(format!(
            "weight dims {:?} do not match layer {:?}",
            weights.dims(),
            wdims
        )));
    }
    let adims = [layer.ax, layer.ay, layer.c];
    if activations.dims() != adims {
        return Err(Error::Shape(format!(
            "activation dims {:?} do not match layer {:?}",
            activations.dims(),
            adims
        )));
    }

    let (ox_n, oy_n) = (layer.out_x(), layer.out_y());
    let s = layer.stride;
    let owner_x = owner_map(layer.ax, cfg.pe_grid_x);
    let owner_y = owner_map(layer.ay, cfg.pe_grid_y);
    let groups = partition_stride_groups(layer);

    // Per-PE nonzero activations, bucketed (stride group, channel) -> (x, y).
    type ActBuckets = BTreeMap<(usize, usize), Vec<(usize, usize)>>;
    let pe_count = cfg.pe_grid_x * cfg.pe_grid_y;
    let mut pe_acts: Vec<ActBuckets> = vec![BTreeMap::new(); pe_count];
    for (gi, g) in groups.iter().enumerate() {
        for &(x, y) in &g.act_positions {
            let pe = owner_x[x] * cfg.pe_grid_y + owner_y[y];
            for ch in 0..layer.c {
                if activations.at(&[x, y, ch]) != 0 {
                    pe_acts[pe].entry((gi, ch)).or_default().push((x, y));
                }
            }
        }
    }
    // Every PE holds all weights; compact once per (stride group, channel).
    let mut group_weights: Vec<Vec<Vec<(usize, usize, usize)>>> =
        vec![vec![Vec::new(); layer.c]; groups.len()];
    for k in 0..layer.kk {
        for (gi, g) in groups.iter().enumerate() {
            for &(fx, fy) in &g.weight_positions {
                for (ch, bucket) in group_weights[gi].iter_mut().enumerate() {
                    if weights.at(&[k, fx, fy, ch]) != 0 {
                        bucket.push((k, fx, fy));
                    }
                }
            }
        }
    }

    let mut counters = CycleCounters::default();
    let mut worst: u64 = 0;
    let mut bank_hits = vec![0u64; cfg.accumulator_banks];
    for (pe, acts) in pe_acts.iter().enumerate() {
        let (pe_x, pe_y) = (pe / cfg.pe_grid_y, pe % cfg.pe_grid_y);
        let mut compute: u64 = 0;
        let mut halo: u64 = 0;
        for (&(gi, ch), positions) in acts {
            let ws = &group_weights[gi][ch];
            if ws.is_empty() {
                continue;
            }
            for achunk in positions.chunks(cfg.acts_per_cycle) {
                for wchunk in ws.chunks(cfg.weights_per_cycle) {
                    bank_hits.fill(0);
                    let mut best = 0u64;
                    for &(x, y) in achunk {
                        for &(k, fx, fy) in wchunk {
                            // Same phase group, so x-fx and y-fy divide by s.
                            if x < fx || y < fy {
                                continue;
                            }
                            let (ox, oy) = ((x - fx) / s, (y - fy) / s);
                            if ox >= ox_n || oy >= oy_n {
                                continue;
                            }
                            let bank = (ox + oy * ox_n + k * ox_n * oy_n) % cfg.accumulator_banks;
                            bank_hits[bank] += 1;
                            best = best.max(bank_hits[bank]);
                            counters.macs_executed += 1;
                            if owner_x[ox * s] * cfg.pe_grid_y + owner_y[oy * s] != pe {
                                halo += 1;
                            }
                        }
                    }
                    let cost = best.max(1);
                    compute += cost;
                    counters.columns_fetched += 1;
                    *counters
                        .serial_cycles_histogram
                        .entry(cost as u32)
                        .or_insert(0) += 1;
                }
            }
        }
        let trailing = if halo == 0 {
            0
        } else {
            let mut neighbors = 0u64;
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (pe_x as i64 + dx, pe_y as i64 + dy);
                    if nx >= 0
                        && ny >= 0
                        && (nx as usize) < cfg.pe_grid_x
                        && (ny as usize) < cfg.pe_grid_y
                    {
                        neighbors += 1;
                    }
                }
            }
            let rate = neighbors * cfg.halo_sends_per_cycle as u64;
            halo.div_ceil(rate).saturating_sub(compute)
        };
        counters.bubbles += trailing;
        worst = worst.max(compute + trailing);
    }

    let dcnn = cycles_dcnn(layer, &ArchConfig::default());
    Ok(CycleReport {
        cycles: worst,
        speedup_vs_dcnn: dcnn as f64 / worst as f64,
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{gen_synthetic, Tensor, ValueModel};

    fn layer(ax: usize, ay: usize, c: usize, fx: usize, fy: usize, kk: usize) -> LayerSpec {
        LayerSpec {
            ax,
            ay,
            c,
            fx,
            fy,
            kk,
            stride: 1,
            relu: false,
            precision_bits: 16,
        }
    }

    #[test]
    fn stride_one_single_group() {
        let l = layer(6, 6, 2, 3, 3, 1);
        let groups = partition_stride_groups(&l);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].weight_positions.len(), 9);
        assert_eq!(groups[0].act_positions.len(), 36);
    }

    #[test]
    fn stride_two_3x3_group_sizes() {
        let mut l = layer(7, 7, 1, 3, 3, 1);
        l.stride = 2;
        let groups = partition_stride_groups(&l);
        assert_eq!(groups.len(), 4);
        let mut sizes: Vec<usize> = groups.iter().map(|g| g.weight_positions.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 2, 4]);
    }

    #[test]
    fn stride_groups_cover_macs_exactly_once() {
        for s in 1..=3usize {
            let mut l = layer(9, 8, 2, 3, 2, 1);
            l.stride = s;
            let groups = partition_stride_groups(&l);
            // Collect (x, y, fx, fy) pairs that form valid outputs per group.
            let mut seen = std::collections::BTreeSet::new();
            for g in &groups {
                for &(x, y) in &g.act_positions {
                    for &(fx, fy) in &g.weight_positions {
                        if x < fx || y < fy {
                            continue;
                        }
                        let (ox, oy) = ((x - fx) / s, (y - fy) / s);
                        if ox < l.out_x() && oy < l.out_y() {
                            assert!(seen.insert((x, y, fx, fy)), "duplicate pair s={s}");
                        }
                    }
                }
            }
            // Dense enumeration of the same pair set.
            let mut expect = std::collections::BTreeSet::new();
            for ox in 0..l.out_x() {
                for oy in 0..l.out_y() {
                    for fx in 0..l.fx {
                        for fy in 0..l.fy {
                            expect.insert((ox * s + fx, oy * s + fy, fx, fy));
                        }
                    }
                }
            }
            assert_eq!(seen, expect, "stride {s}");
        }
    }

    fn effectual_pairs(l: &LayerSpec, w: &Tensor16, a: &Tensor16) -> u64 {
        let mut count = 0;
        for ox in 0..l.out_x() {
            for oy in 0..l.out_y() {
                for k in 0..l.kk {
                    for fx in 0..l.fx {
                        for fy in 0..l.fy {
                            for ch in 0..l.c {
                                if w.at(&[k, fx, fy, ch]) != 0
                                    && a.at(&[ox * l.stride + fx, oy * l.stride + fy, ch]) != 0
                                {
                                    count += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn conserves_effectual_products_and_bound() {
        for seed in 0..10 {
            let mut l = layer(11, 9, 3, 3, 3, 5);
            l.stride = if seed % 2 == 0 { 1 } else { 2 };
            let (w, a) =
                gen_synthetic(&l, 0.55, ValueModel::ClusteredNearZero { scale: 4.0 }, seed)
                    .unwrap();
            let rep = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap();
            let pairs = effectual_pairs(&l, &w, &a);
            assert_eq!(rep.counters.macs_executed, pairs, "seed {seed}");
            assert!(rep.cycles >= pairs.div_ceil(1024), "seed {seed}");
        }
    }

    #[test]
    fn zero_tensors_cost_nothing() {
        let l = layer(6, 6, 2, 2, 2, 2);
        let w = Tensor::zeros(vec![2, 2, 2, 2]).unwrap();
        let a = Tensor::zeros(vec![6, 6, 2]).unwrap();
        let rep = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap();
        assert_eq!(rep.cycles, 0);
        assert!(rep.speedup_vs_dcnn.is_infinite());
        let (w2, _) = gen_synthetic(&l, 0.0, ValueModel::UniformPBit, 3).unwrap();
        let rep = simulate_scnn(&l, &w2, &a, &ScnnConfig::default()).unwrap();
        assert_eq!(rep.cycles, 0);
    }

    #[test]
    fn sixteen_products_distinct_banks_one_cycle() {
        // Ox = 34, so the filter index contributes 4k (mod 32) to the bank
        // and the four activations at x = 0..4 contribute x: all distinct.
        let l = layer(34, 34, 1, 1, 1, 4);
        let w = Tensor::new(vec![4, 1, 1, 1], vec![1; 4]).unwrap();
        let mut a = Tensor::zeros(vec![34, 34, 1]).unwrap();
        for x in 0..4 {
            a.set(&[x, 0, 0], 1);
        }
        let rep = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap();
        assert_eq!(rep.counters.macs_executed, 16);
        assert_eq!(rep.cycles, 1);
    }

    #[test]
    fn sixteen_products_one_bank_sixteen_cycles() {
        // Ox*Oy = 1024 = 0 (mod 32) and Ox = 0 (mod 32): with the acts in one
        // column every product hits bank 0.
        let l = layer(32, 32, 1, 1, 1, 4);
        let w = Tensor::new(vec![4, 1, 1, 1], vec![1; 4]).unwrap();
        let mut a = Tensor::zeros(vec![32, 32, 1]).unwrap();
        for y in 0..4 {
            a.set(&[0, y, 0], 1);
        }
        let rep = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap();
        assert_eq!(rep.counters.macs_executed, 16);
        assert_eq!(rep.cycles, 16);
    }

    #[test]
    fn halo_trailing_cycles_at_corners() {
        // One activation column at x = 7 on an 8x8 map: every PE in that
        // column computes 32 halo products (fx = 1 of a 2-wide filter) in 8
        // chunk cycles. Corner PEs have 3 neighbors: ceil(32/3) - 8 = 3
        // trailing cycles; edge PEs (5 neighbors) absorb theirs.
        let l = layer(8, 8, 1, 2, 1, 32);
        let mut w = Tensor::zeros(vec![32, 2, 1, 1]).unwrap();
        for k in 0..32 {
            w.set(&[k, 1, 0, 0], 1);
        }
        let mut a = Tensor::zeros(vec![8, 8, 1]).unwrap();
        for y in 0..8 {
            a.set(&[7, y, 0], 1);
        }
        let rep = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap();
        assert_eq!(rep.counters.macs_executed, 8 * 32);
        assert_eq!(rep.counters.columns_fetched, 8 * 8);
        assert_eq!(rep.counters.bubbles, 6); // two corner PEs, 3 cycles each
        assert_eq!(rep.cycles, 11); // 8 compute + 3 trailing
    }

    #[test]
    fn seven_by_seven_maps_channel_serial() {
        // 7x7 map on the 8x8 grid: no PE owns more than one (x, y).
        let owner_x = owner_map(7, 8);
        let owner_y = owner_map(7, 8);
        let mut per_pe = std::collections::BTreeMap::new();
        for &ox in owner_x.iter().take(7) {
            for &oy in owner_y.iter().take(7) {
                *per_pe.entry((ox, oy)).or_insert(0u32) += 1;
            }
        }
        assert!(per_pe.values().all(|&n| n <= 1));
        // So each chunk holds one activation: cycles = weight chunks summed
        // over channels on the busiest PE.
        let l = layer(7, 7, 3, 1, 1, 4);
        let w = Tensor::new(vec![4, 1, 1, 3], vec![1; 12]).unwrap();
        let a = Tensor::new(vec![7, 7, 3], vec![1; 147]).unwrap();
        let rep = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap();
        assert_eq!(rep.counters.columns_fetched, 49 * 3); // one chunk per ch
        assert_eq!(rep.cycles, 3);
    }

    #[test]
    fn fully_connected_rejected() {
        let l = layer(3, 3, 2, 3, 3, 4);
        let (w, a) = gen_synthetic(&l, 0.0, ValueModel::UniformPBit, 1).unwrap();
        let err = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn dense_never_beats_multiplier_peak() {
        for seed in 20..26 {
            let l = layer(14, 14, 4, 3, 3, 8);
            let (w, a) = gen_synthetic(&l, 0.0, ValueModel::UniformPBit, seed).unwrap();
            let rep = simulate_scnn(&l, &w, &a, &ScnnConfig::default()).unwrap();
            assert!(
                rep.counters.macs_executed <= rep.cycles * 1024,
                "seed {seed}"
            );
        }
    }
}
