//! Network-level simulation reports: one CSV/JSON row per layer per
//! architecture, a dcnn baseline always present, and whole-network summary
//! rows (cycle totals plus arithmetic- and geometric-mean speedups).

use serde::Serialize;

use crate::cycle::{cycles_dcnn, simulate_layer, ArchConfig, ArchMode, CycleReport};
use crate::error::{Error, Result};
use crate::manifest::ResolvedLayer;
use crate::scnn::{simulate_scnn, ScnnConfig};

/// One architecture to price a network on.
#[derive(Debug, Clone)]
pub enum SimArch {
    Tcl(ArchMode),
    Scnn(ScnnConfig),
}

impl SimArch {
    pub fn label(&self) -> &'static str {
        match self {
            SimArch::Tcl(mode) => mode.as_str(),
            SimArch::Scnn(_) => "scnn",
        }
    }
}

pub const CSV_HEADER: &str =
    "network,layer,arch,h,d,sites,cycles,dcnn_cycles,speedup,columns,bubbles,macs,bits_broadcast";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub network: String,
    /// Layer index, or `all`/`mean-arith`/`mean-geo` for summary rows.
    pub layer: String,
    pub arch: String,
    pub h: usize,
    pub d: usize,
    pub sites: usize,
    pub cycles: u64,
    pub dcnn_cycles: u64,
    pub speedup: f64,
    pub columns: u64,
    pub bubbles: u64,
    pub macs: u64,
    pub bits_broadcast: u64,
}

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.4},{},{},{},{}",
            self.network,
            self.layer,
            self.arch,
            self.h,
            self.d,
            self.sites,
            self.cycles,
            self.dcnn_cycles,
            self.speedup,
            self.columns,
            self.bubbles,
            self.macs,
            self.bits_broadcast
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<ReportRow> {
        let bad = |what: &str| Error::Format(format!("report row: {what}: `{line}`"));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(bad("expected 13 fields"));
        }
        let int =
            |i: usize, what: &str| -> Result<u64> { fields[i].parse().map_err(|_| bad(what)) };
        Ok(ReportRow {
            network: fields[0].to_string(),
            layer: fields[1].to_string(),
            arch: fields[2].to_string(),
            h: int(3, "h")? as usize,
            d: int(4, "d")? as usize,
            sites: int(5, "sites")? as usize,
            cycles: int(6, "cycles")?,
            dcnn_cycles: int(7, "dcnn_cycles")?,
            speedup: fields[8].parse().map_err(|_| bad("speedup"))?,
            columns: int(9, "columns")?,
            bubbles: int(10, "bubbles")?,
            macs: int(11, "macs")?,
            bits_broadcast: int(12, "bits_broadcast")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkReport {
    pub network: String,
    /// Per-layer rows, manifest order outer, architecture order inner.
    pub rows: Vec<ReportRow>,
    /// Three rows per architecture: `all` (totals; speedup is the cycle-sum
    /// ratio), `mean-arith`, and `mean-geo` (only the speedup column carries
    /// information in the mean rows).
    pub summary: Vec<ReportRow>,
    /// Human-readable notes for layers an architecture could not price.
    pub skipped: Vec<String>,
}

pub fn render_network_csv(report: &NetworkReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in report.rows.iter().chain(&report.summary) {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Price every layer on every architecture (a dcnn baseline is prepended when
/// absent). Fully-connected layers are skipped for scnn with a note; serial
/// modes fail if a layer carries no activations.
pub fn simulate_network(
    network: &str,
    layers: &[ResolvedLayer],
    base: &ArchConfig,
    arches: &[SimArch],
) -> Result<NetworkReport> {
    let mut order: Vec<SimArch> = Vec::new();
    if !arches
        .iter()
        .any(|a| matches!(a, SimArch::Tcl(ArchMode::Dcnn)))
    {
        order.push(SimArch::Tcl(ArchMode::Dcnn));
    }
    order.extend(arches.iter().cloned());

    let mut report = NetworkReport {
        network: network.to_string(),
        rows: Vec::new(),
        summary: Vec::new(),
        skipped: Vec::new(),
    };
    for resolved in layers {
        for arch in &order {
            let dcnn_cycles = cycles_dcnn(&resolved.layer, base);
            let priced: CycleReport = match arch {
                SimArch::Tcl(mode) => {
                    let cfg = ArchConfig {
                        mode: *mode,
                        ..base.clone()
                    };
                    simulate_layer(
                        &resolved.layer,
                        &resolved.weights,
                        resolved.activations.as_ref(),
                        &cfg,
                    )?
                }
                SimArch::Scnn(cfg) => {
                    if resolved.layer.is_fully_connected() {
                        report.skipped.push(format!(
                            "layer {}: fully connected, not priced for scnn",
                            resolved.index
                        ));
                        continue;
                    }
                    simulate_scnn(
                        &resolved.layer,
                        &resolved.weights,
                        resolved
                            .activations
                            .as_ref()
                            .ok_or_else(|| Error::Config("scnn needs activations".into()))?,
                        cfg,
                    )?
                }
            };
            let (h, d, sites) = match arch {
                SimArch::Tcl(ArchMode::Dcnn) | SimArch::Scnn(_) => (0, 0, 0),
                SimArch::Tcl(_) => (
                    base.pattern.lookahead(),
                    base.pattern.max_lane_delta(),
                    base.pattern.sites().len(),
                ),
            };
            report.rows.push(ReportRow {
                network: network.to_string(),
                layer: resolved.index.to_string(),
                arch: arch.label().to_string(),
                h,
                d,
                sites,
                cycles: priced.cycles,
                dcnn_cycles,
                speedup: dcnn_cycles as f64 / priced.cycles as f64,
                columns: priced.counters.columns_fetched,
                bubbles: priced.counters.bubbles,
                macs: priced.counters.macs_executed,
                bits_broadcast: priced.counters.activation_bits_broadcast,
            });
        }
    }

    for arch in &order {
        let rows: Vec<&ReportRow> = report
            .rows
            .iter()
            .filter(|r| r.arch == arch.label())
            .collect();
        if rows.is_empty() {
            continue;
        }
        let sum = |f: fn(&ReportRow) -> u64| rows.iter().map(|r| f(r)).sum::<u64>();
        let (cycles, dcnn) = (sum(|r| r.cycles), sum(|r| r.dcnn_cycles));
        let speedups: Vec<f64> = rows.iter().map(|r| r.speedup).collect();
        let arith = speedups.iter().sum::<f64>() / speedups.len() as f64;
        let geo = (speedups.iter().map(|s| s.ln()).sum::<f64>() / speedups.len() as f64).exp();
        let blank = |layer: &str, speedup: f64| ReportRow {
            network: network.to_string(),
            layer: layer.to_string(),
            arch: arch.label().to_string(),
            h: 0,
            d: 0,
            sites: 0,
            cycles: 0,
            dcnn_cycles: 0,
            speedup,
            columns: 0,
            bubbles: 0,
            macs: 0,
            bits_broadcast: 0,
        };
        report.summary.push(ReportRow {
            layer: "all".to_string(),
            cycles,
            dcnn_cycles: dcnn,
            speedup: dcnn as f64 / cycles as f64,
            columns: sum(|r| r.columns),
            bubbles: sum(|r| r.bubbles),
            macs: sum(|r| r.macs),
            bits_broadcast: sum(|r| r.bits_broadcast),
            ..blank("all", 0.0)
        });
        report.summary.push(blank("mean-arith", arith));
        report.summary.push(blank("mean-geo", geo));
    }
    Ok(report)
}
