//! Tensors, layer geometry, the bit-exact convolution reference, sparsity
//! statistics, and the synthetic sparse-tensor generator.
//!
//! Weights are signed 16-bit values. Activations are stored in the same
//! 16-bit container but carry post-ReLU semantics: the bit pattern is
//! interpreted as an unsigned 16-bit magnitude everywhere (arithmetic,
//! precision analysis, encoding).

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convolution layer geometry plus per-layer activation precision.
///
/// A fully-connected layer is expressed as `fx == ax, fy == ay, stride == 1`
/// (a single window).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Input spatial extents.
    pub ax: usize,
    pub ay: usize,
    /// Input channels.
    pub c: usize,
    /// Filter spatial extents.
    pub fx: usize,
    pub fy: usize,
    /// Filter count (output channels).
    pub kk: usize,
    pub stride: usize,
    pub relu: bool,
    /// Profiled activation precision for this layer, 1..=16.
    #[serde(rename = "precisionBits")]
    pub precision_bits: u8,
}

impl LayerSpec {
    pub fn out_x(&self) -> usize {
        (self.ax - self.fx) / self.stride + 1
    }

    pub fn out_y(&self) -> usize {
        (self.ay - self.fy) / self.stride + 1
    }

    /// Number of output windows, `Ox * Oy`.
    pub fn windows(&self) -> usize {
        self.out_x() * self.out_y()
    }

    /// Weights per filter, `Fx * Fy * C`.
    pub fn filter_len(&self) -> usize {
        self.fx * self.fy * self.c
    }

    /// Total multiply-accumulates in the dense layer.
    pub fn total_macs(&self) -> u64 {
        self.windows() as u64 * self.kk as u64 * self.filter_len() as u64
    }

    /// Single-window layer with unit stride.
    pub fn is_fully_connected(&self) -> bool {
        self.fx == self.ax && self.fy == self.ay && self.stride == 1
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.ax,
            self.ay,
            self.c,
            self.fx,
            self.fy,
            self.kk,
            self.stride,
        ];
        if dims.contains(&0) {
            return Err(Error::Shape(format!("layer has a zero extent: {self:?}")));
        }
        if self.fx > self.ax || self.fy > self.ay {
            return Err(Error::Shape(format!(
                "filter {}x{} exceeds input {}x{}",
                self.fx, self.fy, self.ax, self.ay
            )));
        }
        if self.precision_bits == 0 || self.precision_bits > 16 {
            return Err(Error::Config(format!(
                "precisionBits {} outside 1..=16",
                self.precision_bits
            )));
        }
        Ok(())
    }
}

/// Dense row-major tensor, last dimension fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

/// The on-disk element type: signed 16-bit.
pub type Tensor16 = Tensor<i16>;

impl<T: Copy> Tensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Shape(format!("bad tensor dims {dims:?}")));
        }
        let want: usize = dims.iter().product();
        if want != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {want} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self>
    where
        T: Default,
    {
        let len: usize = dims.iter().product();
        Tensor::new(dims, vec![T::default(); len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (i, &x) in idx.iter().enumerate() {
            debug_assert!(x < self.dims[i], "index {idx:?} out of {:?}", self.dims);
            off = off * self.dims[i] + x;
        }
        off
    }

    pub fn at(&self, idx: &[usize]) -> T {
        self.data[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let off = self.flat(idx);
        self.data[off] = v;
    }
}

/// Activation values are post-ReLU magnitudes: reinterpret the stored bits
/// as unsigned.
pub fn act_u16(raw: i16) -> u16 {
    raw as u16
}

pub const TCLT_MAGIC: [u8; 4] = *b"TCLT";
const TCLT_VERSION: u8 = 1;
const TCLT_DTYPE_S16: u8 = 0;

impl Tensor16 {
    /// Serialize to the TCLT byte format.
    ///
    /// Layout: magic `54 43 4C 54`, version byte (1), dtype byte (0 =
    /// signed 16-bit), rank byte, one reserved zero byte, `rank` u32
    /// little-endian extents, then the payload as little-endian i16 values,
    /// row-major with the last dimension fastest.
    pub fn to_tclt_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 2 * self.data.len());
        out.extend_from_slice(&TCLT_MAGIC);
        out.push(TCLT_VERSION);
        out.push(TCLT_DTYPE_S16);
        out.push(self.dims.len() as u8);
        out.push(0);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_tclt_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Format(format!(
                "TCLT header needs 8 bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[0..4] != TCLT_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:02x} {:02x} {:02x} {:02x}, want 54 43 4c 54",
                bytes[0], bytes[1], bytes[2], bytes[3]
            )));
        }
        if bytes[4] != TCLT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        if bytes[5] != TCLT_DTYPE_S16 {
            return Err(Error::Format(format!("unsupported dtype {}", bytes[5])));
        }
        let rank = bytes[6] as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::Format(format!("rank {rank} outside 1..=8")));
        }
        if bytes[7] != 0 {
            return Err(Error::Format(format!(
                "reserved byte is {}, want 0",
                bytes[7]
            )));
        }
        let header = 8 + 4 * rank;
        if bytes.len() < header {
            return Err(Error::Format(format!(
                "truncated header: {} bytes, rank {rank} needs {header}",
                bytes.len()
            )));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for i in 0..rank {
            let off = 8 + 4 * i;
            let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
            if d == 0 {
                return Err(Error::Format(format!("extent {i} is zero")));
            }
            count = count
                .checked_mul(d)
                .ok_or_else(|| Error::Format("element count overflows".into()))?;
            dims.push(d);
        }
        let want = header + 2 * count;
        if bytes.len() < want {
            return Err(Error::Format(format!(
                "truncated payload: {} bytes, want {want}",
                bytes.len()
            )));
        }
        if bytes.len() > want {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                bytes.len() - want
            )));
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let off = header + 2 * i;
            data.push(i16::from_le_bytes(bytes[off..off + 2].try_into().unwrap()));
        }
        Tensor::new(dims, data)
    }
}

pub fn save_tensor(t: &Tensor16, path: &Path) -> Result<()> {
    fs::write(path, t.to_tclt_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: &Path) -> Result<Tensor16> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor16::from_tclt_bytes(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Check that every activation fits the layer's declared precision.
pub fn validate_activations(layer: &LayerSpec, activations: &Tensor16) -> Result<()> {
    let cap = layer.precision_bits;
    if cap == 16 {
        return Ok(());
    }
    let limit = 1u32 << cap;
    for &raw in activations.data() {
        let v = act_u16(raw);
        if (v as u32) >= limit {
            return Err(Error::Precision { value: v, cap });
        }
    }
    Ok(())
}

fn check_weight_dims(layer: &LayerSpec, weights: &Tensor16) -> Result<()> {
    let want = [layer.kk, layer.fx, layer.fy, layer.c];
    if weights.dims() != want {
        return Err(Error::Shape(format!(
            "weights dims {:?}, layer wants {want:?}",
            weights.dims()
        )));
    }
    Ok(())
}

fn check_act_dims(layer: &LayerSpec, activations: &Tensor16) -> Result<()> {
    let want = [layer.ax, layer.ay, layer.c];
    if activations.dims() != want {
        return Err(Error::Shape(format!(
            "activations dims {:?}, layer wants {want:?}",
            activations.dims()
        )));
    }
    Ok(())
}

/// Bit-exact convolution reference.
///
/// `weights` is `[K, Fx, Fy, C]`, `activations` is `[Ax, Ay, C]`, the output
/// is `[Ox, Oy, K]`. Each output is the exact integer dot product of filter
/// `k` with its window; accumulation is wide and the narrowing to 32 bits is
/// checked, so an overflow panics rather than wrapping. If `layer.relu`,
/// negative outputs clamp to zero.
pub fn dense_conv(
    layer: &LayerSpec,
    weights: &Tensor16,
    activations: &Tensor16,
) -> Result<Tensor<i32>> {
    layer.validate()?;
    check_weight_dims(layer, weights)?;
    check_act_dims(layer, activations)?;

    let (ox, oy) = (layer.out_x(), layer.out_y());
    let (fx, fy, c) = (layer.fx, layer.fy, layer.c);
    let (ay, s, kk) = (layer.ay, layer.stride, layer.kk);
    let w = weights.data();
    let a = activations.data();

    let mut out = vec![0i32; ox * oy * kk];
    for k in 0..kk {
        let wbase = k * fx * fy * c;
        for wy in 0..oy {
            for wx in 0..ox {
                let mut acc: i64 = 0;
                for dx in 0..fx {
                    let arow = ((wx * s + dx) * ay + wy * s) * c;
                    let wrow = wbase + (dx * fy) * c;
                    for dy in 0..fy {
                        let aoff = arow + dy * c;
                        let woff = wrow + dy * c;
                        for ch in 0..c {
                            let wv = w[woff + ch] as i64;
                            let av = act_u16(a[aoff + ch]) as i64;
                            acc += wv * av;
                        }
                    }
                }
                if layer.relu && acc < 0 {
                    acc = 0;
                }
                let v = i32::try_from(acc).unwrap_or_else(|_| {
                    panic!("accumulator overflow: {acc} at (ox={wx}, oy={wy}, k={k})")
                });
                out[(wx * oy + wy) * kk + k] = v;
            }
        }
    }
    Tensor::new(vec![ox, oy, kk], out)
}

/// Static and effective (multiply-weighted) weight sparsity of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparsityStats {
    /// Zero weights over total weights.
    pub static_sparsity: f64,
    /// Zero-weight multiplies over total multiplies.
    pub effective_sparsity: f64,
}

pub fn sparsity_stats<'a, I>(network: I) -> Result<SparsityStats>
where
    I: IntoIterator<Item = (&'a LayerSpec, &'a Tensor16)>,
{
    let mut weights_total: u64 = 0;
    let mut weights_zero: u64 = 0;
    let mut mult_total: u64 = 0;
    let mut mult_zero: u64 = 0;
    for (layer, weights) in network {
        layer.validate()?;
        check_weight_dims(layer, weights)?;
        let zeros = weights.data().iter().filter(|&&w| w == 0).count() as u64;
        let count = weights.len() as u64;
        let windows = layer.windows() as u64;
        weights_total += count;
        weights_zero += zeros;
        mult_total += count * windows;
        mult_zero += zeros * windows;
    }
    if weights_total == 0 {
        return Err(Error::Config("empty network".into()));
    }
    Ok(SparsityStats {
        static_sparsity: weights_zero as f64 / weights_total as f64,
        effective_sparsity: mult_zero as f64 / mult_total as f64,
    })
}

/// How synthetic activation values are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueModel {
    /// Uniform over `0 ..= 2^p - 1` for a layer profiled at `p` bits.
    UniformPBit,
    /// Exponentially distributed near zero with the given mean; models
    /// post-ReLU activation statistics (many zeros and small values).
    ClusteredNearZero { scale: f64 },
}

/// Largest weight magnitude that keeps every dot product inside `i32`.
fn weight_bound(layer: &LayerSpec) -> i16 {
    let act_max = (1u64 << layer.precision_bits) - 1;
    let terms = layer.filter_len() as u64;
    let cap = (i32::MAX as u64) / terms.max(1) / act_max.max(1);
    cap.clamp(1, 31) as i16
}

/// Deterministic synthetic layer data: weights with an exact zero count and
/// activations drawn from the value model.
///
/// Exactly `round(weight_sparsity * count)` weight positions are zero; the
/// rest are nonzero with magnitudes bounded so `dense_conv` cannot overflow.
pub fn gen_synthetic(
    layer: &LayerSpec,
    weight_sparsity: f64,
    model: ValueModel,
    seed: u64,
) -> Result<(Tensor16, Tensor16)> {
    layer.validate()?;
    if !(0.0..=1.0).contains(&weight_sparsity) {
        return Err(Error::Config(format!(
            "weight sparsity {weight_sparsity} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let count = layer.kk * layer.filter_len();
    let bound = weight_bound(layer);
    let mut w = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = rng.random_range(-(bound as i32)..=bound as i32 - 1) as i16;
        if v >= 0 {
            v += 1; // skip zero: values in [-bound, -1] or [1, bound]
        }
        w.push(v);
    }
    let zeros = (weight_sparsity * count as f64).round() as usize;
    let mut order: Vec<usize> = (0..count).collect();
    for i in 0..zeros {
        let j = rng.random_range(i..count);
        order.swap(i, j);
    }
    for &pos in &order[..zeros] {
        w[pos] = 0;
    }

    let max_val = (1u32 << layer.precision_bits) - 1;
    let act_count = layer.ax * layer.ay * layer.c;
    let mut a = Vec::with_capacity(act_count);
    for _ in 0..act_count {
        let v: u32 = match model {
            ValueModel::UniformPBit => rng.random_range(0..=max_val),
            ValueModel::ClusteredNearZero { scale } => {
                let u: f64 = rng.random();
                let draw = (-scale * (1.0 - u).ln()).floor();
                (draw as u32).min(max_val)
            }
        };
        a.push(v as u16 as i16);
    }

    let weights = Tensor::new(vec![layer.kk, layer.fx, layer.fy, layer.c], w)?;
    let activations = Tensor::new(vec![layer.ax, layer.ay, layer.c], a)?;
    Ok((weights, activations))
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn single_mac() {
        let l = layer(1, 1, 1, 1, 1, 1);
        let w = Tensor::new(vec![1, 1, 1, 1], vec![5]).unwrap();
        let a = Tensor::new(vec![1, 1, 1], vec![3]).unwrap();
        let out = dense_conv(&l, &w, &a).unwrap();
        assert_eq!(out.data(), &[15]);
    }

    #[test]
    fn zero_weights_zero_output() {
        let l = layer(4, 4, 2, 2, 2, 3);
        let w = Tensor::zeros(vec![3, 2, 2, 2]).unwrap();
        let (_, a) = gen_synthetic(&l, 0.0, ValueModel::UniformPBit, 9).unwrap();
        let out = dense_conv(&l, &w, &a).unwrap();
        assert!(out.data().iter().all(|&v| v == 0));
    }

    /// Independent brute-force oracle: walk every output and every filter tap
    /// with explicit index arithmetic, no shared helpers.
    fn conv_oracle(l: &LayerSpec, w: &Tensor16, a: &Tensor16) -> Vec<i32> {
        let (ox, oy) = ((l.ax - l.fx) / l.stride + 1, (l.ay - l.fy) / l.stride + 1);
        let mut out = vec![0i32; ox * oy * l.kk];
        for wx in 0..ox {
            for wy in 0..oy {
                for k in 0..l.kk {
                    let mut acc: i64 = 0;
                    for ch in 0..l.c {
                        for dx in 0..l.fx {
                            for dy in 0..l.fy {
                                let wv = w.at(&[k, dx, dy, ch]) as i64;
                                let av = (a.at(&[wx * l.stride + dx, wy * l.stride + dy, ch])
                                    as u16) as i64;
                                acc += wv * av;
                            }
                        }
                    }
                    if l.relu && acc < 0 {
                        acc = 0;
                    }
                    out[(wx * oy + wy) * l.kk + k] = acc as i32;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_loop_oracle() {
        let mut l = layer(6, 6, 3, 3, 3, 4);
        l.relu = true;
        let (w, a) = gen_synthetic(&l, 0.4, ValueModel::UniformPBit, 7).unwrap();
        let got = dense_conv(&l, &w, &a).unwrap();
        assert_eq!(got.data(), conv_oracle(&l, &w, &a).as_slice());
        assert_eq!(got.dims(), &[4, 4, 4]);
    }

    #[test]
    fn conv_strided_matches_oracle() {
        let mut l = layer(7, 5, 2, 3, 3, 3);
        l.stride = 2;
        let (w, a) =
            gen_synthetic(&l, 0.5, ValueModel::ClusteredNearZero { scale: 40.0 }, 21).unwrap();
        let got = dense_conv(&l, &w, &a).unwrap();
        assert_eq!(got.data(), conv_oracle(&l, &w, &a).as_slice());
        assert_eq!(got.dims(), &[3, 2, 3]);
    }

    #[test]
    fn conv_linear_in_activations() {
        let l = layer(4, 4, 2, 2, 2, 2);
        let (w, a1) = gen_synthetic(&l, 0.3, ValueModel::UniformPBit, 1).unwrap();
        let (_, a2) = gen_synthetic(&l, 0.3, ValueModel::UniformPBit, 2).unwrap();
        // Halve the inputs so the sum stays a valid unsigned 16-bit value.
        let half = |t: &Tensor16| {
            let d: Vec<i16> = t.data().iter().map(|&v| ((v as u16) / 2) as i16).collect();
            Tensor::new(t.dims().to_vec(), d).unwrap()
        };
        let (a1, a2) = (half(&a1), half(&a2));
        let sum: Vec<i16> = a1
            .data()
            .iter()
            .zip(a2.data())
            .map(|(&x, &y)| ((x as u16) + (y as u16)) as i16)
            .collect();
        let asum = Tensor::new(a1.dims().to_vec(), sum).unwrap();
        let o1 = dense_conv(&l, &w, &a1).unwrap();
        let o2 = dense_conv(&l, &w, &a2).unwrap();
        let os = dense_conv(&l, &w, &asum).unwrap();
        for i in 0..os.len() {
            assert_eq!(os.data()[i], o1.data()[i] + o2.data()[i]);
        }
    }

    #[test]
    fn conv_rejects_bad_dims() {
        let l = layer(4, 4, 2, 2, 2, 2);
        let w = Tensor::zeros(vec![2, 2, 2, 3]).unwrap();
        let a = Tensor::<i16>::zeros(vec![4, 4, 2]).unwrap();
        assert!(matches!(dense_conv(&l, &w, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn sparsity_single_layer() {
        let l = layer(4, 4, 1, 2, 2, 4);
        let mut w = Tensor::zeros(vec![4, 2, 2, 1]).unwrap();
        for i in 0..8 {
            w.data_mut()[i] = 1;
        }
        let s = sparsity_stats([(&l, &w)]).unwrap();
        assert_eq!(s.static_sparsity, 0.5);
        assert_eq!(s.effective_sparsity, 0.5);
    }

    #[test]
    fn sparsity_multiply_weighted() {
        let l1 = layer(5, 5, 1, 2, 2, 1); // 16 windows, 4 weights
        let l2 = layer(3, 3, 1, 2, 2, 1); // 4 windows, 4 weights
        let w1 = Tensor::new(vec![1, 2, 2, 1], vec![0, 0, 0, 1]).unwrap();
        let w2 = Tensor::new(vec![1, 2, 2, 1], vec![1, 1, 1, 0]).unwrap();
        let s = sparsity_stats([(&l1, &w1), (&l2, &w2)]).unwrap();
        assert_eq!(s.static_sparsity, 4.0 / 8.0);
        // Hand-counted: (3*16 + 1*4) / (4*16 + 4*4) = 52/80.
        assert_eq!(s.effective_sparsity, 52.0 / 80.0);
    }

    #[test]
    fn all_zero_weights_sparsity_one() {
        let l = layer(4, 4, 1, 2, 2, 1);
        let w = Tensor::zeros(vec![1, 2, 2, 1]).unwrap();
        let s = sparsity_stats([(&l, &w)]).unwrap();
        assert_eq!(s.static_sparsity, 1.0);
        assert_eq!(s.effective_sparsity, 1.0);
    }

    #[test]
    fn gen_deterministic() {
        let l = layer(6, 6, 4, 3, 3, 5);
        let x = gen_synthetic(&l, 0.6, ValueModel::ClusteredNearZero { scale: 100.0 }, 42).unwrap();
        let y = gen_synthetic(&l, 0.6, ValueModel::ClusteredNearZero { scale: 100.0 }, 42).unwrap();
        assert_eq!(x, y);
        let z = gen_synthetic(&l, 0.6, ValueModel::ClusteredNearZero { scale: 100.0 }, 43).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn gen_exact_zero_count() {
        // 160 weights at sparsity 0.9 -> exactly 144 zeros.
        let l = layer(8, 8, 4, 2, 2, 10);
        let (w, _) = gen_synthetic(&l, 0.9, ValueModel::UniformPBit, 3).unwrap();
        assert_eq!(w.len(), 160);
        assert_eq!(w.data().iter().filter(|&&v| v == 0).count(), 144);
        let (w1, _) = gen_synthetic(&l, 1.0, ValueModel::UniformPBit, 3).unwrap();
        assert!(w1.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn gen_respects_precision() {
        let mut l = layer(8, 8, 2, 2, 2, 2);
        l.precision_bits = 5;
        let (_, a) = gen_synthetic(&l, 0.0, ValueModel::UniformPBit, 77).unwrap();
        assert!(a.data().iter().all(|&v| (v as u16) < 32));
        validate_activations(&l, &a).unwrap();
    }

    #[test]
    fn precision_validation_catches_overflow() {
        let mut l = layer(1, 1, 1, 1, 1, 1);
        l.precision_bits = 4;
        let a = Tensor::new(vec![1, 1, 1], vec![16]).unwrap();
        assert!(matches!(
            validate_activations(&l, &a),
            Err(Error::Precision { value: 16, cap: 4 })
        ));
    }

    #[test]
    fn tclt_roundtrip() {
        let l = layer(5, 4, 3, 2, 2, 2);
        let (w, a) = gen_synthetic(&l, 0.5, ValueModel::UniformPBit, 11).unwrap();
        for t in [&w, &a] {
            let bytes = t.to_tclt_bytes();
            let back = Tensor16::from_tclt_bytes(&bytes).unwrap();
            assert_eq!(&back, t);
            assert_eq!(back.to_tclt_bytes(), bytes);
        }
    }

    #[test]
    fn tclt_header_layout() {
        let t = Tensor16::new(vec![2, 1, 3], vec![1, -2, 3, 4, -5, 6]).unwrap();
        let b = t.to_tclt_bytes();
        // Rank-3 header is 8 + 12 = 20 bytes.
        assert_eq!(b.len(), 20 + 12);
        assert_eq!(&b[0..4], b"TCLT");
        assert_eq!(b[4], 1);
        assert_eq!(b[5], 0);
        assert_eq!(b[6], 3);
        assert_eq!(b[7], 0);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        // Payload little-endian: first value 1 = 01 00.
        assert_eq!(&b[20..22], &[1, 0]);
    }

    #[test]
    fn tclt_rejects_garbage() {
        let t = Tensor16::new(vec![2], vec![7, 8]).unwrap();
        let good = t.to_tclt_bytes();

        let mut bad_magic = good.clone();
        bad_magic[3] = 0x55; // "TCLU"
        assert!(matches!(
            Tensor16::from_tclt_bytes(&bad_magic),
            Err(Error::Format(_))
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(Tensor16::from_tclt_bytes(&bad_version).is_err());

        let mut bad_dtype = good.clone();
        bad_dtype[5] = 1;
        assert!(Tensor16::from_tclt_bytes(&bad_dtype).is_err());

        assert!(Tensor16::from_tclt_bytes(&good[..good.len() - 1]).is_err());

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(Tensor16::from_tclt_bytes(&trailing).is_err());

        let mut zero_extent = good.clone();
        zero_extent[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(Tensor16::from_tclt_bytes(&zero_extent).is_err());
    }

    #[test]
    fn mac_order_permutation_invariant() {
        // Same accumulation walked (fy, fx, c) instead of (c, fx, fy).
        let l = layer(5, 5, 3, 2, 3, 2);
        let (w, a) = gen_synthetic(&l, 0.2, ValueModel::UniformPBit, 5).unwrap();
        let base = dense_conv(&l, &w, &a).unwrap();
        let (ox, oy) = (l.out_x(), l.out_y());
        for wx in 0..ox {
            for wy in 0..oy {
                for k in 0..l.kk {
                    let mut acc: i64 = 0;
                    for dy in 0..l.fy {
                        for dx in 0..l.fx {
                            for ch in 0..l.c {
                                acc += w.at(&[k, dx, dy, ch]) as i64
                                    * (a.at(&[wx + dx, wy + dy, ch]) as u16) as i64;
                            }
                        }
                    }
                    assert_eq!(base.at(&[wx, wy, k]) as i64, acc);
                }
            }
        }
    }
}
