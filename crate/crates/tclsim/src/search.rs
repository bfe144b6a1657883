//! Promotion-pattern exploration: full-window baselines, the fixed Checkers
//! pattern, and greedy connection pruning driven by weight-skip cycles on a
//! tuning network.

use crate::cycle::{cycles_tcl_ws, ArchConfig, ArchMode};
use crate::error::{Error, Result};
use crate::schedule::{PromotionPattern, PromotionSite};
use crate::tensor::{LayerSpec, Tensor16};

/// Every connection within `h` steps of lookahead and `max_lane_distance`
/// lanes of lookaside: `{(0,s)} ∪ {(j,s): j=1..d, s=1..h}`.
pub fn full_window_pattern(
    h: usize,
    max_lane_distance: usize,
    lanes: usize,
) -> Result<PromotionPattern> {
    if max_lane_distance < 1 || max_lane_distance >= lanes {
        return Err(Error::Config(format!(
            "lane distance {max_lane_distance} out of range 1..{lanes}"
        )));
    }
    let mut sites = Vec::new();
    for s in 1..=h {
        sites.push(PromotionSite {
            lane_delta: 0,
            step_delta: s,
        });
        for j in 1..=max_lane_distance {
            sites.push(PromotionSite {
                lane_delta: j,
                step_delta: s,
            });
        }
    }
    PromotionPattern::new(h, sites, lanes)
}

/// The fixed 7-site checkerboard at lookahead 2: step parity alternates with
/// lane distance.
pub fn checkers_pattern(lanes: usize) -> Result<PromotionPattern> {
    let sites = [(0, 1), (0, 2), (1, 1), (2, 2), (3, 1), (4, 2), (5, 1)]
        .into_iter()
        .map(|(lane_delta, step_delta)| PromotionSite {
            lane_delta,
            step_delta,
        })
        .collect();
    PromotionPattern::new(2, sites, lanes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchTrace {
    /// Tuning-network cycles of the starting pattern, before any removal.
    pub initial_cycles: u64,
    /// Each pruning step: the site removed and the cycles after removing it.
    pub steps: Vec<(PromotionSite, u64)>,
    pub final_pattern: PromotionPattern,
}

/// `step,removed_dl,removed_ds,cycles` rows, steps numbered from 1.
pub fn render_trace_csv(trace: &SearchTrace) -> String {
    let mut out = String::from("step,removed_dl,removed_ds,cycles\n");
    for (i, (site, cycles)) in trace.steps.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{cycles}\n",
            i + 1,
            site.lane_delta,
            site.step_delta
        ));
    }
    out
}

fn network_cycles(
    network: &[(&LayerSpec, &Tensor16)],
    base: &ArchConfig,
    pattern: &PromotionPattern,
) -> Result<u64> {
    let arch = ArchConfig {
        pattern: pattern.clone(),
        mode: ArchMode::TclWs,
        ..base.clone()
    };
    let mut total = 0u64;
    for (layer, weights) in network {
        total += cycles_tcl_ws(layer, weights, &arch)?.cycles;
    }
    Ok(total)
}

/// Start from the full window and repeatedly drop the single site whose
/// removal costs the fewest total weight-skip cycles on the tuning network,
/// until `target_sites` remain. Ties go to the lexicographically largest
/// `(lane_delta, step_delta)`, which makes the trace deterministic.
pub fn greedy_prune_search(
    network: &[(&LayerSpec, &Tensor16)],
    base: &ArchConfig,
    h: usize,
    max_lane_distance: usize,
    target_sites: usize,
) -> Result<SearchTrace> {
    let mut pattern = full_window_pattern(h, max_lane_distance, base.lanes)?;
    if target_sites > pattern.sites().len() {
        return Err(Error::Config(format!(
            "target of {target_sites} sites exceeds the {}-site full window",
            pattern.sites().len()
        )));
    }
    let initial_cycles = network_cycles(network, base, &pattern)?;
    let mut steps = Vec::new();
    while pattern.sites().len() > target_sites {
        let mut best: Option<(u64, PromotionSite)> = None;
        for &site in pattern.sites() {
            let cycles = network_cycles(network, base, &pattern.without_site(site))?;
            let replace = match best {
                None => true,
                Some((bc, bs)) => cycles < bc || (cycles == bc && site > bs),
            };
            if replace {
                best = Some((cycles, site));
            }
        }
        let (cycles, site) = best.expect("pattern has sites to remove");
        pattern = pattern.without_site(site);
        steps.push((site, cycles));
    }
    Ok(SearchTrace {
        initial_cycles,
        steps,
        final_pattern: pattern,
    })
}
