//! Static weight scheduling: the dense lane/step schedule, promotion
//! patterns, the greedy compaction pass that fills tile schedules, and the
//! decoder that recovers dense provenance for verification.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{LayerSpec, Tensor16};

/// One multiplexer connection: a slot at lane `l` with window base `b` may
/// pull the weight at dense position `((l - lane_delta) mod n, b + step_delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PromotionSite {
    /// 0 for lookahead (same lane), 1..n-1 for lookaside.
    pub lane_delta: usize,
    /// Steps ahead of the window base, 1..=lookahead.
    pub step_delta: usize,
}

/// A set of promotion sites sharing one lookahead depth.
///
/// The no-promotion connection `(0,0)` is implicit: mux input 0. Sites occupy
/// mux inputs 1.. in canonical order (lookahead sites by step, then lookaside
/// sites by `(lane_delta, step_delta)`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromotionPattern {
    lookahead: usize,
    sites: Vec<PromotionSite>,
}

impl PromotionPattern {
    /// Build a validated pattern for an `lanes`-lane machine.
    pub fn new(lookahead: usize, sites: Vec<PromotionSite>, lanes: usize) -> Result<Self> {
        if lanes < 1 {
            return Err(Error::Config("lanes must be >= 1".into()));
        }
        let set: BTreeSet<PromotionSite> = sites.into_iter().collect();
        for s in &set {
            if s.step_delta == 0 || s.step_delta > lookahead {
                return Err(Error::Config(format!(
                    "site ({},{}) outside lookahead {lookahead}",
                    s.lane_delta, s.step_delta
                )));
            }
            if s.lane_delta >= lanes {
                return Err(Error::Config(format!(
                    "site ({},{}) lane delta exceeds {} lanes",
                    s.lane_delta, s.step_delta, lanes
                )));
            }
        }
        let mut ordered: Vec<PromotionSite> =
            set.iter().copied().filter(|s| s.lane_delta == 0).collect();
        ordered.extend(set.iter().copied().filter(|s| s.lane_delta > 0));
        Ok(PromotionPattern {
            lookahead,
            sites: ordered,
        })
    }

    /// No promotion at all: the window advances one step per column.
    pub fn none() -> Self {
        PromotionPattern {
            lookahead: 0,
            sites: Vec::new(),
        }
    }

    /// The contiguous `<h, d>` pattern: lookahead sites `(0, 1..=h)` plus
    /// lookaside sites `(1..=d, 1)`.
    pub fn contiguous(h: usize, d: usize, lanes: usize) -> Result<Self> {
        if d > 0 && h == 0 {
            return Err(Error::Config(
                "lookaside requires lookahead >= 1 (it borrows the step+1 lane)".into(),
            ));
        }
        if d + 1 > lanes {
            return Err(Error::Config(format!(
                "lookaside {d} needs more than {lanes} lanes"
            )));
        }
        let mut sites = Vec::with_capacity(h + d);
        for s in 1..=h {
            sites.push(PromotionSite {
                lane_delta: 0,
                step_delta: s,
            });
        }
        for j in 1..=d {
            sites.push(PromotionSite {
                lane_delta: j,
                step_delta: 1,
            });
        }
        PromotionPattern::new(h, sites, lanes)
    }

    pub fn lookahead(&self) -> usize {
        self.lookahead
    }

    pub fn sites(&self) -> &[PromotionSite] {
        &self.sites
    }

    /// Largest lane delta over all sites (the `d` column in reports).
    pub fn max_lane_delta(&self) -> usize {
        self.sites.iter().map(|s| s.lane_delta).max().unwrap_or(0)
    }

    pub fn mux_inputs(&self) -> usize {
        self.sites.len() + 1
    }

    /// Select field width in bits: ceil(log2(mux inputs)).
    pub fn select_bits(&self) -> u32 {
        let inputs = self.mux_inputs();
        usize::BITS - (inputs - 1).leading_zeros()
    }

    /// Same pattern with one site removed.
    pub fn without_site(&self, site: PromotionSite) -> Self {
        let sites = self.sites.iter().copied().filter(|&s| s != site).collect();
        PromotionPattern {
            lookahead: self.lookahead,
            sites,
        }
    }

    /// Render the pattern file: a `h=<int>` header then one `dl,ds` per line.
    pub fn render(&self) -> String {
        let mut out = format!("h={}\n", self.lookahead);
        for s in &self.sites {
            out.push_str(&format!("{},{}\n", s.lane_delta, s.step_delta));
        }
        out
    }

    /// Parse the pattern file format. Blank lines and `#` comments are
    /// ignored; the first content line must be the `h=` header.
    pub fn parse(text: &str, lanes: usize) -> Result<Self> {
        let mut lookahead: Option<usize> = None;
        let mut sites = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if lookahead.is_none() {
                let rest = line.strip_prefix("h=").ok_or_else(|| {
                    Error::Format(format!("pattern line {}: expected h=<int> header", ln + 1))
                })?;
                lookahead = Some(rest.trim().parse().map_err(|_| {
                    Error::Format(format!("pattern line {}: bad lookahead {rest:?}", ln + 1))
                })?);
                continue;
            }
            let (dl, ds) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("pattern line {}: expected dl,ds", ln + 1)))?;
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| {
                    Error::Format(format!("pattern line {}: bad integer {s:?}", ln + 1))
                })
            };
            sites.push(PromotionSite {
                lane_delta: parse(dl)?,
                step_delta: parse(ds)?,
            });
        }
        let lookahead =
            lookahead.ok_or_else(|| Error::Format("pattern file missing h= header".into()))?;
        PromotionPattern::new(lookahead, sites, lanes)
    }
}

/// A weight's origin in the filter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightCoord {
    pub c: usize,
    pub fx: usize,
    pub fy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightEntry {
    pub value: i16,
    pub coord: WeightCoord,
}

/// The dense lane/step layout of one filter.
///
/// A weight at `(c, fx, fy)` has linear index `l = fy + Fy*(fx + Fx*c)`,
/// lane `l mod n`, step `l div n`. Only effectual (nonzero) weights populate
/// the grid.
#[derive(Debug, Clone)]
pub struct DenseSchedule {
    pub filter_id: usize,
    lanes: usize,
    steps: usize,
    /// `steps * lanes` slots, step-major.
    grid: Vec<Option<WeightEntry>>,
}

impl DenseSchedule {
    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn at(&self, lane: usize, step: usize) -> Option<WeightEntry> {
        self.grid[step * self.lanes + lane]
    }

    /// All effectual positions as `(lane, step, value)`.
    pub fn effectual(&self) -> BTreeSet<(usize, usize, i16)> {
        let mut out = BTreeSet::new();
        for step in 0..self.steps {
            for lane in 0..self.lanes {
                if let Some(e) = self.at(lane, step) {
                    out.insert((lane, step, e.value));
                }
            }
        }
        out
    }

    pub fn effectual_count(&self) -> usize {
        self.grid.iter().filter(|e| e.is_some()).count()
    }
}

/// Lay one filter's weights out over `lanes` weight lanes.
pub fn build_dense_schedule(
    weights: &Tensor16,
    layer: &LayerSpec,
    lanes: usize,
    filter_id: usize,
) -> Result<DenseSchedule> {
    if lanes < 1 {
        return Err(Error::Config("lanes must be >= 1".into()));
    }
    let want = [layer.fx, layer.fy, layer.c];
    if weights.dims() != want {
        return Err(Error::Shape(format!(
            "filter dims {:?}, layer wants {want:?}",
            weights.dims()
        )));
    }
    let total = layer.filter_len();
    let steps = total.div_ceil(lanes);
    let mut grid = vec![None; steps * lanes];
    for c in 0..layer.c {
        for fx in 0..layer.fx {
            for fy in 0..layer.fy {
                let value = weights.at(&[fx, fy, c]);
                if value == 0 {
                    continue;
                }
                let l = fy + layer.fy * (fx + layer.fx * c);
                let (lane, step) = (l % lanes, l / lanes);
                grid[step * lanes + lane] = Some(WeightEntry {
                    value,
                    coord: WeightCoord { c, fx, fy },
                });
            }
        }
    }
    Ok(DenseSchedule {
        filter_id,
        lanes,
        steps,
        grid,
    })
}

/// Copy filter `k` out of a `[K, Fx, Fy, C]` weight tensor.
pub fn filter_slice(weights: &Tensor16, layer: &LayerSpec, k: usize) -> Result<Tensor16> {
    let want = [layer.kk, layer.fx, layer.fy, layer.c];
    if weights.dims() != want {
        return Err(Error::Shape(format!(
            "weights dims {:?}, layer wants {want:?}",
            weights.dims()
        )));
    }
    if k >= layer.kk {
        return Err(Error::Shape(format!("filter {k} out of {}", layer.kk)));
    }
    let len = layer.filter_len();
    let data = weights.data()[k * len..(k + 1) * len].to_vec();
    Tensor16::new(vec![layer.fx, layer.fy, layer.c], data)
}

/// A filled slot: which weight executes there and how the mux is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotAssignment {
    pub value: i16,
    /// Index into `{(0,0)} ∪ pattern.sites()`; 0 means no promotion.
    pub mux_select: usize,
    /// Dense provenance.
    pub source_lane: usize,
    pub source_step: usize,
}

/// One cycle of the compacted schedule.
#[derive(Debug, Clone)]
pub struct ScheduleColumn {
    /// Dense step the lookahead window starts at.
    pub base: usize,
    /// How far the window advances after this column, 0..=h+1.
    pub alc: usize,
    /// `filters * lanes` slots, filter-major. Empty on advance-only bubbles.
    pub slots: Vec<Option<SlotAssignment>>,
}

impl ScheduleColumn {
    pub fn is_bubble(&self) -> bool {
        self.slots.iter().all(|s| s.is_none())
    }
}

/// The compacted schedule of one tile (up to k filters in lockstep).
#[derive(Debug, Clone)]
pub struct TileSchedule {
    pub lanes: usize,
    pub filters: usize,
    pub steps: usize,
    pub lookahead: usize,
    pub columns: Vec<ScheduleColumn>,
}

impl TileSchedule {
    pub fn slot(&self, col: &ScheduleColumn, filter: usize, lane: usize) -> Option<SlotAssignment> {
        col.slots[filter * self.lanes + lane]
    }

    pub fn compute_columns(&self) -> usize {
        self.columns.iter().filter(|c| !c.is_bubble()).count()
    }

    pub fn bubbles(&self) -> usize {
        self.columns.iter().filter(|c| c.is_bubble()).count()
    }
}

/// Compile a tile: all filters share the window base, and each slot greedily
/// pulls the oldest reachable unconsumed weight (own position first, then
/// promotion sites by source step, then by lane delta).
///
/// The window advance (ALC) per column is the number of leading fully
/// consumed steps across all filters, capped at h+1 by the register banks;
/// longer empty runs cost advance-only bubble columns. The total advance over
/// all columns equals the dense step count: the activation stream traverses
/// the whole dense order even after the last weight is consumed.
pub fn schedule_tile(dense: &[DenseSchedule], pattern: &PromotionPattern) -> Result<TileSchedule> {
    let first = dense
        .first()
        .ok_or_else(|| Error::Config("schedule_tile needs at least one filter".into()))?;
    let (lanes, steps) = (first.lanes, first.steps);
    for d in dense {
        if d.lanes != lanes || d.steps != steps {
            return Err(Error::Shape(format!(
                "filter {} is {}x{}, tile is {}x{}",
                d.filter_id, d.lanes, d.steps, lanes, steps
            )));
        }
    }
    for s in pattern.sites() {
        if s.lane_delta >= lanes {
            return Err(Error::Config(format!(
                "site ({},{}) lane delta exceeds {lanes} lanes",
                s.lane_delta, s.step_delta
            )));
        }
    }

    let filters = dense.len();
    let h = pattern.lookahead();
    let mut live: Vec<Vec<Option<i16>>> = dense
        .iter()
        .map(|d| d.grid.iter().map(|e| e.map(|w| w.value)).collect())
        .collect();
    // Unconsumed weights per step, across all filters, for O(1) advance checks.
    let mut step_load: Vec<usize> = vec![0; steps];
    for f in &live {
        for (i, w) in f.iter().enumerate() {
            if w.is_some() {
                step_load[i / lanes] += 1;
            }
        }
    }

    let mut columns = Vec::new();
    let mut b = 0;
    while b < steps {
        if step_load[b] == 0 {
            // Advance-only bubble: skip up to h+1 consumed steps in one cycle.
            let mut run = 0;
            while b + run < steps && step_load[b + run] == 0 && run < h + 1 {
                run += 1;
            }
            columns.push(ScheduleColumn {
                base: b,
                alc: run,
                slots: vec![None; filters * lanes],
            });
            b += run;
            continue;
        }

        let mut slots: Vec<Option<SlotAssignment>> = vec![None; filters * lanes];
        for (f, filter_live) in live.iter_mut().enumerate() {
            for l in 0..lanes {
                // Candidate 0 is the slot's own dense position.
                let mut best: Option<(usize, usize, usize, usize)> = None; // (step, dl, mux, lane)
                let own = b * lanes + l;
                if filter_live[own].is_some() {
                    best = Some((b, 0, 0, l));
                }
                if best.is_none() {
                    // Own position always wins when present (lowest step and
                    // lane delta), so sites only matter when it is empty.
                    for (i, s) in pattern.sites().iter().enumerate() {
                        let step = b + s.step_delta;
                        if step >= steps {
                            continue;
                        }
                        let lane = (l + lanes - s.lane_delta) % lanes;
                        if filter_live[step * lanes + lane].is_none() {
                            continue;
                        }
                        let cand = (step, s.lane_delta, i + 1, lane);
                        if best.is_none_or(|bst| (cand.0, cand.1) < (bst.0, bst.1)) {
                            best = Some(cand);
                        }
                    }
                }
                if let Some((step, _dl, mux, lane)) = best {
                    let idx = step * lanes + lane;
                    let value = filter_live[idx].take().unwrap();
                    step_load[step] -= 1;
                    slots[f * lanes + l] = Some(SlotAssignment {
                        value,
                        mux_select: mux,
                        source_lane: lane,
                        source_step: step,
                    });
                }
            }
        }

        // The own-lane rule guarantees step b drained, so alc >= 1.
        let mut alc = 0;
        while b + alc < steps && step_load[b + alc] == 0 && alc < h + 1 {
            alc += 1;
        }
        debug_assert!(alc >= 1);
        columns.push(ScheduleColumn {
            base: b,
            alc,
            slots,
        });
        b += alc;
    }

    Ok(TileSchedule {
        lanes,
        filters,
        steps,
        lookahead: h,
        columns,
    })
}

/// Recover every slot's dense provenance from the column base and mux select.
///
/// Returns `(filter, lane, step, value)` tuples; the set must equal the
/// effectual positions of the input dense schedules.
pub fn decode_schedule(
    ts: &TileSchedule,
    pattern: &PromotionPattern,
) -> Result<BTreeSet<(usize, usize, usize, i16)>> {
    let mut out = BTreeSet::new();
    for (ci, col) in ts.columns.iter().enumerate() {
        for f in 0..ts.filters {
            for l in 0..ts.lanes {
                let Some(slot) = ts.slot(col, f, l) else {
                    continue;
                };
                let (dl, ds) = if slot.mux_select == 0 {
                    (0, 0)
                } else {
                    let site = pattern.sites().get(slot.mux_select - 1).ok_or_else(|| {
                        Error::CorruptSchedule(format!(
                            "column {ci} filter {f} lane {l}: select {} but pattern has {} sites",
                            slot.mux_select,
                            pattern.sites().len()
                        ))
                    })?;
                    (site.lane_delta, site.step_delta)
                };
                let lane = (l + ts.lanes - dl) % ts.lanes;
                let step = col.base + ds;
                if step >= ts.steps {
                    return Err(Error::CorruptSchedule(format!(
                        "column {ci} filter {f} lane {l}: source step {step} out of {}",
                        ts.steps
                    )));
                }
                if !out.insert((f, lane, step, slot.value)) {
                    return Err(Error::CorruptSchedule(format!(
                        "duplicate source (f{f}, lane {lane}, step {step})"
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Column/bubble counts and per-lane fill ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleStats {
    pub columns: usize,
    pub bubbles: usize,
    /// Fraction of (compute column, filter) slots filled, per lane.
    pub per_lane_occupancy: Vec<f64>,
}

pub fn schedule_stats(ts: &TileSchedule) -> ScheduleStats {
    let columns = ts.compute_columns();
    let bubbles = ts.bubbles();
    let mut filled = vec![0usize; ts.lanes];
    for col in ts.columns.iter().filter(|c| !c.is_bubble()) {
        for f in 0..ts.filters {
            for (l, count) in filled.iter_mut().enumerate() {
                if ts.slot(col, f, l).is_some() {
                    *count += 1;
                }
            }
        }
    }
    let denom = (columns * ts.filters).max(1) as f64;
    ScheduleStats {
        columns,
        bubbles,
        per_lane_occupancy: filled.iter().map(|&n| n as f64 / denom).collect(),
    }
}

/// Human-readable schedule dump, one line per column.
pub fn render_dump(ts: &TileSchedule) -> String {
    let mut out = String::new();
    for (ci, col) in ts.columns.iter().enumerate() {
        out.push_str(&format!("col {ci} alc={}", col.alc));
        for f in 0..ts.filters {
            for l in 0..ts.lanes {
                if let Some(s) = ts.slot(col, f, l) {
                    let dl = (l + ts.lanes - s.source_lane) % ts.lanes;
                    let ds = s.source_step - col.base;
                    out.push_str(&format!(
                        " | f{f} l{l}: w={} sel=({dl},{ds}) src=({},{})",
                        s.value, s.source_lane, s.source_step
                    ));
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{gen_synthetic, ValueModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The worked single-filter example: n=4, 16 weight positions, effectual
    /// set {w[0,0], w[1,0], w[3,0], w[1,1], w[2,2], w[3,3]} (lane, step).
    /// Expressed as a 1x1x16 filter so linear index == channel.
    fn walkthrough_filter() -> (LayerSpec, Tensor16) {
        let layer = LayerSpec {
            ax: 1,
            ay: 1,
            c: 16,
            fx: 1,
            fy: 1,
            kk: 1,
            stride: 1,
            relu: false,
            precision_bits: 16,
        };
        let mut data = vec![0i16; 16];
        // (lane, step) -> linear = step*4 + lane
        for (i, &l) in [0usize, 1, 3, 5, 10, 15].iter().enumerate() {
            data[l] = i as i16 + 1;
        }
        let w = Tensor16::new(vec![1, 1, 16], data).unwrap();
        (layer, w)
    }

    #[test]
    fn dense_layout_walkthrough() {
        let (layer, w) = walkthrough_filter();
        let d = build_dense_schedule(&w, &layer, 4, 0).unwrap();
        assert_eq!(d.steps(), 4);
        let got: Vec<(usize, usize)> = d.effectual().iter().map(|&(l, s, _)| (l, s)).collect();
        assert_eq!(got, vec![(0, 0), (1, 0), (1, 1), (2, 2), (3, 0), (3, 3)]);
    }

    #[test]
    fn lookahead_one_takes_three_columns() {
        let (layer, w) = walkthrough_filter();
        let d = build_dense_schedule(&w, &layer, 4, 0).unwrap();
        let p = PromotionPattern::contiguous(1, 0, 4).unwrap();
        let ts = schedule_tile(std::slice::from_ref(&d), &p).unwrap();
        assert_eq!(ts.compute_columns(), 3);
        assert_eq!(ts.bubbles(), 0);
        assert_eq!(decode_schedule(&ts, &p).unwrap().len(), 6);
    }

    #[test]
    fn lookaside_one_takes_two_columns() {
        let (layer, w) = walkthrough_filter();
        let d = build_dense_schedule(&w, &layer, 4, 0).unwrap();
        let p = PromotionPattern::contiguous(1, 1, 4).unwrap();
        let ts = schedule_tile(std::slice::from_ref(&d), &p).unwrap();
        assert_eq!(ts.compute_columns(), 2);
        assert_eq!(ts.bubbles(), 0);
        let decoded = decode_schedule(&ts, &p).unwrap();
        let want = d.effectual();
        let got: BTreeSet<(usize, usize, i16)> =
            decoded.iter().map(|&(_, l, s, v)| (l, s, v)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn no_promotion_walks_every_occupied_step() {
        let (layer, w) = walkthrough_filter();
        let d = build_dense_schedule(&w, &layer, 4, 0).unwrap();
        let p = PromotionPattern::none();
        let ts = schedule_tile(std::slice::from_ref(&d), &p).unwrap();
        assert_eq!(ts.compute_columns(), 4);
        assert_eq!(ts.bubbles(), 0);
        for col in &ts.columns {
            for f in 0..ts.filters {
                for l in 0..ts.lanes {
                    if let Some(s) = ts.slot(col, f, l) {
                        assert_eq!(s.mux_select, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_filter_matches_steps_any_pattern() {
        let layer = LayerSpec {
            ax: 3,
            ay: 3,
            c: 4,
            fx: 3,
            fy: 3,
            kk: 1,
            stride: 1,
            relu: false,
            precision_bits: 16,
        };
        let (w, _) = gen_synthetic(&layer, 0.0, ValueModel::UniformPBit, 4).unwrap();
        let f = filter_slice(&w, &layer, 0).unwrap();
        let d = build_dense_schedule(&f, &layer, 4, 0).unwrap();
        assert_eq!(d.steps(), 9);
        for (h, dd) in [(0, 0), (1, 1), (2, 3), (4, 2)] {
            let p = PromotionPattern::contiguous(h, dd, 4).unwrap();
            let ts = schedule_tile(std::slice::from_ref(&d), &p).unwrap();
            assert_eq!(ts.compute_columns(), 9);
            assert_eq!(ts.bubbles(), 0);
        }
    }

    #[test]
    fn all_zero_filter_yields_only_bubbles() {
        let layer = LayerSpec {
            ax: 2,
            ay: 2,
            c: 8,
            fx: 2,
            fy: 2,
            kk: 1,
            stride: 1,
            relu: false,
            precision_bits: 16,
        };
        let f = Tensor16::zeros(vec![2, 2, 8]).unwrap();
        let d = build_dense_schedule(&f, &layer, 4, 0).unwrap(); // 8 steps
        let p = PromotionPattern::contiguous(2, 1, 4).unwrap();
        let ts = schedule_tile(std::slice::from_ref(&d), &p).unwrap();
        assert_eq!(ts.compute_columns(), 0);
        assert_eq!(ts.bubbles(), 8usize.div_ceil(3));
        let advanced: usize = ts.columns.iter().map(|c| c.alc).sum();
        assert_eq!(advanced, 8);
    }

    #[test]
    fn contiguous_pattern_shapes() {
        let p = PromotionPattern::contiguous(1, 1, 16).unwrap();
        assert_eq!(
            p.sites(),
            &[
                PromotionSite {
                    lane_delta: 0,
                    step_delta: 1
                },
                PromotionSite {
                    lane_delta: 1,
                    step_delta: 1
                }
            ]
        );
        let p = PromotionPattern::contiguous(0, 0, 16).unwrap();
        assert!(p.sites().is_empty());
        assert_eq!(p.mux_inputs(), 1);
        assert_eq!(p.select_bits(), 0);
        let p = PromotionPattern::contiguous(2, 5, 16).unwrap();
        assert_eq!(p.sites().len(), 7);
        assert_eq!(p.mux_inputs(), 8);
        assert_eq!(p.select_bits(), 3);
        assert!(PromotionPattern::contiguous(0, 1, 16).is_err());
        assert!(PromotionPattern::contiguous(1, 16, 16).is_err());
    }

    #[test]
    fn pattern_file_roundtrip() {
        let p = PromotionPattern::contiguous(2, 3, 16).unwrap();
        let text = p.render();
        assert!(text.starts_with("h=2\n"));
        let q = PromotionPattern::parse(&text, 16).unwrap();
        assert_eq!(p, q);

        let r = PromotionPattern::parse("# comment\n\nh=3\n0,2\n4,3\n", 8).unwrap();
        assert_eq!(r.lookahead(), 3);
        assert_eq!(r.sites().len(), 2);
        assert_eq!(r.max_lane_delta(), 4);

        assert!(PromotionPattern::parse("0,1\n", 8).is_err());
        assert!(PromotionPattern::parse("h=1\n0,2\n", 8).is_err()); // ds > h
        assert!(PromotionPattern::parse("h=1\n9,1\n", 8).is_err()); // dl >= lanes
    }

    fn random_layer(rng: &mut ChaCha8Rng) -> LayerSpec {
        let fx = rng.random_range(1..=3);
        let fy = rng.random_range(1..=3);
        LayerSpec {
            ax: rng.random_range(fx..=6),
            ay: rng.random_range(fy..=6),
            c: rng.random_range(1..=8),
            fx,
            fy,
            kk: rng.random_range(1..=4),
            stride: 1,
            relu: false,
            precision_bits: 16,
        }
    }

    fn random_pattern(rng: &mut ChaCha8Rng, lanes: usize) -> PromotionPattern {
        let h = rng.random_range(0..=4);
        let mut sites = Vec::new();
        if h > 0 {
            for _ in 0..rng.random_range(0..=8) {
                sites.push(PromotionSite {
                    lane_delta: rng.random_range(0..lanes),
                    step_delta: rng.random_range(1..=h),
                });
            }
        }
        PromotionPattern::new(h, sites, lanes).unwrap()
    }

    #[test]
    fn roundtrip_random_tiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..200 {
            let layer = random_layer(&mut rng);
            let sparsity = [0.0, 0.3, 0.6, 0.9][rng.random_range(0..4)];
            let seed = rng.random();
            let (w, _) = gen_synthetic(&layer, sparsity, ValueModel::UniformPBit, seed).unwrap();
            let lanes = [2, 4, 16][rng.random_range(0..3)];
            let pattern = random_pattern(&mut rng, lanes);
            let dense: Vec<DenseSchedule> = (0..layer.kk)
                .map(|k| {
                    let f = filter_slice(&w, &layer, k).unwrap();
                    build_dense_schedule(&f, &layer, lanes, k).unwrap()
                })
                .collect();
            let ts = schedule_tile(&dense, &pattern).unwrap();

            // Roundtrip: decoded provenance equals the effectual set.
            let decoded = decode_schedule(&ts, &pattern).unwrap();
            let mut want = BTreeSet::new();
            for (f, d) in dense.iter().enumerate() {
                for (l, s, v) in d.effectual() {
                    want.insert((f, l, s, v));
                }
            }
            assert_eq!(decoded, want);

            // Total advance covers the dense steps exactly.
            let advanced: usize = ts.columns.iter().map(|c| c.alc).sum();
            assert_eq!(advanced, dense[0].steps());

            // Speedup bound: advance <= h+1 per column.
            let cols = ts.columns.len();
            assert!(cols >= dense[0].steps().div_ceil(pattern.lookahead() + 1));

            // Column floor: each column holds at most `lanes` weights of any
            // one filter.
            let stats = schedule_stats(&ts);
            let max_filter_load = (0..layer.kk)
                .map(|f| dense[f].effectual_count())
                .max()
                .unwrap();
            assert!(stats.columns >= max_filter_load.div_ceil(lanes));

            // Without lookaside a dense lane can only drain through its own
            // slot, one weight per column.
            if pattern.max_lane_delta() == 0 {
                let max_lane_load = (0..layer.kk)
                    .flat_map(|f| (0..lanes).map(move |l| (f, l)))
                    .map(|(f, l)| {
                        (0..dense[f].steps())
                            .filter(|&s| dense[f].at(l, s).is_some())
                            .count()
                    })
                    .max()
                    .unwrap();
                assert!(stats.columns >= max_lane_load);
            }
        }
    }

    /// Every column or bubble of a promoted schedule advances the window by
    /// at least one step, so no pattern can be slower than no pattern at all
    /// (which spends exactly one cycle per dense step). Site-for-site subset
    /// comparisons are NOT monotone in general: a new site can steal a weight
    /// an emptier lane would have taken, and the displaced lane may reach
    /// less far. The search tests cover the well-behaved instances.
    #[test]
    fn any_pattern_never_slower_than_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..120 {
            let layer = random_layer(&mut rng);
            let (w, _) = gen_synthetic(&layer, 0.7, ValueModel::UniformPBit, rng.random()).unwrap();
            let lanes = 4;
            let dense: Vec<DenseSchedule> = (0..layer.kk)
                .map(|k| {
                    let f = filter_slice(&w, &layer, k).unwrap();
                    build_dense_schedule(&f, &layer, lanes, k).unwrap()
                })
                .collect();
            let pattern = random_pattern(&mut rng, lanes);
            let cost = |p: &PromotionPattern| schedule_tile(&dense, p).unwrap().columns.len();
            assert!(
                cost(&pattern) <= cost(&PromotionPattern::none()),
                "pattern slower than dense stepping: {pattern:?}"
            );
        }
    }

    #[test]
    fn growing_lookahead_with_same_sites_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..100 {
            let layer = random_layer(&mut rng);
            let (w, _) = gen_synthetic(&layer, 0.8, ValueModel::UniformPBit, rng.random()).unwrap();
            let lanes = 4;
            let dense: Vec<DenseSchedule> = (0..layer.kk)
                .map(|k| {
                    let f = filter_slice(&w, &layer, k).unwrap();
                    build_dense_schedule(&f, &layer, lanes, k).unwrap()
                })
                .collect();
            let base = random_pattern(&mut rng, lanes);
            let grown =
                PromotionPattern::new(base.lookahead() + 2, base.sites().to_vec(), lanes).unwrap();
            let cost = |p: &PromotionPattern| schedule_tile(&dense, p).unwrap().columns.len();
            assert!(cost(&grown) <= cost(&base));
        }
    }

    #[test]
    fn decode_rejects_foreign_pattern() {
        let (layer, w) = walkthrough_filter();
        let d = build_dense_schedule(&w, &layer, 4, 0).unwrap();
        let p = PromotionPattern::contiguous(1, 1, 4).unwrap();
        let ts = schedule_tile(std::slice::from_ref(&d), &p).unwrap();
        let stripped = PromotionPattern::none();
        assert!(matches!(
            decode_schedule(&ts, &stripped),
            Err(Error::CorruptSchedule(_))
        ));
    }

    #[test]
    fn dump_lists_filled_slots() {
        let (layer, w) = walkthrough_filter();
        let d = build_dense_schedule(&w, &layer, 4, 0).unwrap();
        let p = PromotionPattern::contiguous(1, 1, 4).unwrap();
        let ts = schedule_tile(std::slice::from_ref(&d), &p).unwrap();
        let dump = render_dump(&ts);
        assert_eq!(dump.lines().count(), 2);
        assert!(dump.starts_with("col 0 alc=2 | f0 l0: w=1 sel=(0,0) src=(0,0)"));
        assert!(dump.contains("sel=(1,1)"));
    }
}
