//! Ideal speedup potentials for the five ineffectual-work categories:
//! zero activations (A), zero weights (W), both (WA), plus dynamic precision
//! (WAp) and effectual bit content (WAe) on top of weight skipping.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::coding::{needed_bits, oneffset_count};
use crate::error::Result;
use crate::tensor::{act_u16, dense_conv, LayerSpec, Tensor16};

/// A work ratio: finite exact rational, or infinite when no work remains.
#[derive(Debug, Clone, PartialEq)]
pub enum Speedup {
    Finite(BigRational),
    Infinite,
}

impl Speedup {
    fn of(total: &BigRational, work: &BigRational) -> Speedup {
        if work.is_zero() {
            Speedup::Infinite
        } else {
            Speedup::Finite(total / work)
        }
    }

    /// Render with 4 decimal places (half-up); infinity as `inf`.
    pub fn render(&self) -> String {
        match self {
            Speedup::Infinite => "inf".to_string(),
            Speedup::Finite(r) => {
                let scale = BigInt::from(10_000);
                let scaled = (r.numer() * &scale * 2 + r.denom()) / (r.denom() * 2);
                let int = &scaled / &scale;
                let frac = &scaled % &scale;
                format!("{int}.{frac:04}")
            }
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Speedup::Infinite => f64::INFINITY,
            Speedup::Finite(r) => {
                let n: f64 = r.numer().to_string().parse().unwrap_or(f64::NAN);
                let d: f64 = r.denom().to_string().parse().unwrap_or(f64::NAN);
                n / d
            }
        }
    }
}

impl PartialOrd for Speedup {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self, other) {
            (Speedup::Infinite, Speedup::Infinite) => Some(Ordering::Equal),
            (Speedup::Infinite, Speedup::Finite(_)) => Some(Ordering::Greater),
            (Speedup::Finite(_), Speedup::Infinite) => Some(Ordering::Less),
            (Speedup::Finite(a), Speedup::Finite(b)) => a.partial_cmp(b),
        }
    }
}

/// Remaining work per category, in units of one full MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkBreakdown {
    pub total: BigRational,
    pub a: BigRational,
    pub w: BigRational,
    pub wa: BigRational,
    pub wap: BigRational,
    pub wae: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialReport {
    pub speedup_a: Speedup,
    pub speedup_w: Speedup,
    pub speedup_wa: Speedup,
    pub speedup_wap: Speedup,
    pub speedup_wae: Speedup,
    pub works: WorkBreakdown,
}

fn ratio(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn ratio16(n: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(16))
}

/// Ideal speedups from removing each category of ineffectual work.
///
/// The computation factors over weight positions: for each filter tap the
/// nonzero-filter count multiplies the activation statistics of the windows
/// sampling that tap. Precision work counts `needed_bits(a)/16` MACs per
/// effectual weight, bit-content work counts `|oneffsets(a)|/16`.
pub fn ideal_speedups(
    layer: &LayerSpec,
    weights: &Tensor16,
    activations: &Tensor16,
) -> Result<PotentialReport> {
    // Validates dims; the functional result is not needed here.
    dense_conv(
        &LayerSpec {
            relu: layer.relu,
            ..*layer
        },
        weights,
        activations,
    )?;

    let (ox, oy) = (layer.out_x(), layer.out_y());
    let (fx, fy, c) = (layer.fx, layer.fy, layer.c);
    let (ay, s, kk) = (layer.ay, layer.stride, layer.kk);
    let a = activations.data();
    let w = weights.data();
    let filter_len = layer.filter_len();

    // Filters with a nonzero weight at each tap position.
    let mut nz_filters = vec![0u64; filter_len];
    let mut nnz_w: u64 = 0;
    for k in 0..kk {
        for (i, nz) in nz_filters.iter_mut().enumerate() {
            if w[k * filter_len + i] != 0 {
                *nz += 1;
                nnz_w += 1;
            }
        }
    }

    let mut work_a: u64 = 0; // nonzero-activation MACs
    let mut work_wa: u64 = 0; // nonzero weight and activation
    let mut work_wap_16: u64 = 0; // sixteenths of a MAC
    let mut work_wae_16: u64 = 0;
    for dx in 0..fx {
        for dy in 0..fy {
            for ch in 0..c {
                let tap = (dx * fy + dy) * c + ch;
                let nz = nz_filters[tap];
                let mut nonzero: u64 = 0;
                let mut bits: u64 = 0;
                let mut terms: u64 = 0;
                for wx in 0..ox {
                    for wy in 0..oy {
                        let v = act_u16(a[((wx * s + dx) * ay + (wy * s + dy)) * c + ch]);
                        if v != 0 {
                            nonzero += 1;
                        }
                        bits += needed_bits(v, 16)? as u64;
                        terms += oneffset_count(v) as u64;
                    }
                }
                work_a += nonzero * kk as u64;
                work_wa += nonzero * nz;
                work_wap_16 += bits * nz;
                work_wae_16 += terms * nz;
            }
        }
    }

    let works = WorkBreakdown {
        total: ratio(layer.total_macs()),
        a: ratio(work_a),
        w: ratio(nnz_w * (ox * oy) as u64),
        wa: ratio(work_wa),
        wap: ratio16(work_wap_16),
        wae: ratio16(work_wae_16),
    };
    Ok(PotentialReport {
        speedup_a: Speedup::of(&works.total, &works.a),
        speedup_w: Speedup::of(&works.total, &works.w),
        speedup_wa: Speedup::of(&works.total, &works.wa),
        speedup_wap: Speedup::of(&works.total, &works.wap),
        speedup_wae: Speedup::of(&works.total, &works.wae),
        works,
    })
}

/// CSV rows for a network's potentials: one row per layer, then an
/// arithmetic-mean row and a work-weighted mean row (total work over total
/// remaining work). Columns: `layer,A,W,WA,WAp,WAe`.
pub fn render_potential_csv(rows: &[(String, PotentialReport)]) -> String {
    let mut out = String::from("layer,A,W,WA,WAp,WAe\n");
    for (name, rep) in rows {
        out.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            rep.speedup_a.render(),
            rep.speedup_w.render(),
            rep.speedup_wa.render(),
            rep.speedup_wap.render(),
            rep.speedup_wae.render()
        ));
    }
    if rows.is_empty() {
        return out;
    }

    let speedups = |f: fn(&PotentialReport) -> &Speedup| -> Vec<&Speedup> {
        rows.iter().map(|(_, r)| f(r)).collect()
    };
    let arith = |vals: Vec<&Speedup>| -> Speedup {
        let mut sum = BigRational::zero();
        for v in &vals {
            match v {
                Speedup::Infinite => return Speedup::Infinite,
                Speedup::Finite(r) => sum += r,
            }
        }
        Speedup::Finite(sum / BigRational::from_integer(BigInt::from(vals.len() as u64)))
    };
    let weighted = |f: fn(&WorkBreakdown) -> &BigRational| -> Speedup {
        let mut total = BigRational::zero();
        let mut work = BigRational::zero();
        for (_, r) in rows {
            total += &r.works.total;
            work += f(&r.works);
        }
        Speedup::of(&total, &work)
    };

    out.push_str(&format!(
        "mean-arith,{},{},{},{},{}\n",
        arith(speedups(|r| &r.speedup_a)).render(),
        arith(speedups(|r| &r.speedup_w)).render(),
        arith(speedups(|r| &r.speedup_wa)).render(),
        arith(speedups(|r| &r.speedup_wap)).render(),
        arith(speedups(|r| &r.speedup_wae)).render()
    ));
    out.push_str(&format!(
        "mean-work,{},{},{},{},{}\n",
        weighted(|w| &w.a).render(),
        weighted(|w| &w.w).render(),
        weighted(|w| &w.wa).render(),
        weighted(|w| &w.wap).render(),
        weighted(|w| &w.wae).render()
    ));
    out
}
