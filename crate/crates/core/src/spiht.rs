//! Set partitioning in hierarchical trees (SPIHT) over 1D and 2D wavelet
//! pyramids, with bit-exact budget control.
//!
//! Coefficients are placed on a zero-padded dyadic grid whose coarsest band
//! has even dimensions; positions that do not correspond to a real
//! coefficient are masked out and never cost a bit. Parent-child links:
//!
//! * 2D: the usual 2x2 offspring rule. Inside the coarsest band each 2x2
//!   block has one childless member and three members that parent the
//!   co-located 2x2 blocks of the coarsest `HL`, `LH` and `HH` bands.
//! * 1D: a binary tree. A coefficient at position `i` of a detail band
//!   parents positions `2i` and `2i + 1` of the next finer band; the first
//!   half of the approximation band parents the coarsest detail band the
//!   same way, and the second half has no offspring.
//!
//! The stream starts with a 5-bit initial bit-plane index, followed by the
//! sorting and refinement passes. Encoder and decoder share one traversal
//! routine, so their control paths cannot drift apart.

use crate::bits::{BitReader, BitWriter, Bitstream, Full};
use crate::error::{Error, Result};
use crate::wavelet::{approx_lengths, WaveletPyramid1D};

/// Smallest budget [`encode`] accepts.
pub const MIN_BUDGET_BITS: usize = 16;
const PLANE_BITS: u32 = 5;
const MAX_PLANE: u32 = 30;
const NONE: u32 = u32::MAX;

/// Uniformly quantised coefficients in sign-magnitude-ready integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub values: Vec<i32>,
    pub scale: f64,
}

/// `scale = max|c| / (2^(precision_bits-1) - 1)`, values `round(c / scale)`.
pub fn quantize(coefs: &[f64], precision_bits: u32) -> Result<Quantized> {
    if !(2..=24).contains(&precision_bits) {
        return Err(Error::Config(format!(
            "quantizer precision must be in [2, 24], got {precision_bits}"
        )));
    }
    let peak = coefs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    if peak == 0.0 {
        return Ok(Quantized {
            values: vec![0; coefs.len()],
            scale: 0.0,
        });
    }
    let scale = peak / f64::from((1u32 << (precision_bits - 1)) - 1);
    let values = coefs.iter().map(|c| (c / scale).round() as i32).collect();
    Ok(Quantized { values, scale })
}

pub fn dequantize(values: &[i32], scale: f64) -> Vec<f64> {
    values.iter().map(|&v| f64::from(v) * scale).collect()
}

/// Coefficient layout handed to the coder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpihtShape {
    /// `count` independent 1D pyramids of `len` coefficients each, stored
    /// back to back in [`WaveletPyramid1D::to_flat`] order and coded as one
    /// forest.
    OneD { len: usize, levels: usize, count: usize },
    /// One row-major Mallat-layout 2D pyramid.
    TwoD { rows: usize, cols: usize, levels: usize },
}

impl SpihtShape {
    pub fn one_d(len: usize, levels: usize) -> Self {
        SpihtShape::OneD { len, levels, count: 1 }
    }

    pub fn coefficient_count(&self) -> usize {
        match *self {
            SpihtShape::OneD { len, count, .. } => len * count,
            SpihtShape::TwoD { rows, cols, .. } => rows * cols,
        }
    }

    fn validate(&self) -> Result<()> {
        let (dims, levels): (&[usize], usize) = match self {
            SpihtShape::OneD { len, levels, count } => {
                if *count == 0 {
                    return Err(Error::Size("empty 1D forest".into()));
                }
                (std::slice::from_ref(len), *levels)
            }
            SpihtShape::TwoD { rows, cols, levels } => (&[*rows, *cols][..], *levels),
        };
        if levels == 0 || levels > 20 {
            return Err(Error::Size(format!("unsupported tree depth {levels}")));
        }
        if dims.iter().any(|&d| d < 1 << levels) {
            return Err(Error::Size(format!(
                "dimensions {dims:?} too small for {levels} levels"
            )));
        }
        Ok(())
    }
}

/// Tree structure on the padded grid.
struct Forest {
    kind: Kind,
    /// padded position -> actual coefficient index, or `NONE`
    map: Vec<u32>,
    roots: Vec<u32>,
    has_desc: Vec<bool>,
    has_grand: Vec<bool>,
}

#[derive(Clone, Copy)]
enum Kind {
    OneD { n: usize, a0: usize },
    TwoD { pr: usize, pc: usize, r0: usize, c0: usize },
}

fn padded_extent(n: usize, levels: usize) -> usize {
    let unit = 1usize << (levels + 1);
    n.div_ceil(unit) * unit
}

impl Forest {
    fn new(shape: SpihtShape) -> Result<Self> {
        shape.validate()?;
        let (kind, map, roots) = match shape {
            SpihtShape::OneD { len, levels, count } => {
                let n = padded_extent(len, levels);
                let a0 = n >> levels;
                let actual = WaveletPyramid1D::band_lengths(len, levels);
                let mut padded_off = vec![0, a0];
                for l in (1..levels).rev() {
                    padded_off.push(n >> l);
                }
                let mut map = vec![NONE; n * count];
                for s in 0..count {
                    let mut act_off = s * len;
                    for (b, &blen) in actual.iter().enumerate() {
                        for o in 0..blen {
                            map[s * n + padded_off[b] + o] = (act_off + o) as u32;
                        }
                        act_off += blen;
                    }
                }
                let roots = (0..count)
                    .flat_map(|s| (0..a0).map(move |q| (s * n + q) as u32))
                    .collect();
                (Kind::OneD { n, a0 }, map, roots)
            }
            SpihtShape::TwoD { rows, cols, levels } => {
                let (pr, pc) = (padded_extent(rows, levels), padded_extent(cols, levels));
                let ra = approx_lengths(rows, levels);
                let ca = approx_lengths(cols, levels);
                let mut map = vec![NONE; pr * pc];
                let mut place = |ar: std::ops::Range<usize>,
                                 ac: std::ops::Range<usize>,
                                 p_r: usize,
                                 p_c: usize| {
                    for (x, i) in ar.enumerate() {
                        for (y, j) in ac.clone().enumerate() {
                            map[(p_r + x) * pc + p_c + y] = (i * cols + j) as u32;
                        }
                    }
                };
                place(0..ra[levels], 0..ca[levels], 0, 0);
                for l in 1..=levels {
                    let (prl, pcl) = (pr >> l, pc >> l);
                    place(0..ra[l], ca[l]..ca[l - 1], 0, pcl);
                    place(ra[l]..ra[l - 1], 0..ca[l], prl, 0);
                    place(ra[l]..ra[l - 1], ca[l]..ca[l - 1], prl, pcl);
                }
                let (r0, c0) = (pr >> levels, pc >> levels);
                let roots = (0..r0)
                    .flat_map(|i| (0..c0).map(move |j| (i * pc + j) as u32))
                    .collect();
                (Kind::TwoD { pr, pc, r0, c0 }, map, roots)
            }
        };
        let size = map.len();
        let mut forest = Forest {
            kind,
            map,
            roots,
            has_desc: vec![false; size],
            has_grand: vec![false; size],
        };
        // Offspring always sit at larger padded indices, so a reverse sweep
        // visits children before parents.
        let mut kids = [0usize; 4];
        for p in (0..size).rev() {
            let k = forest.children(p, &mut kids);
            let (mut d, mut g) = (false, false);
            for &c in &kids[..k] {
                d |= forest.valid(c) || forest.has_desc[c];
                g |= forest.has_desc[c];
            }
            forest.has_desc[p] = d;
            forest.has_grand[p] = g;
        }
        Ok(forest)
    }

    #[inline]
    fn valid(&self, p: usize) -> bool {
        self.map[p] != NONE
    }

    #[inline]
    fn children(&self, p: usize, out: &mut [usize; 4]) -> usize {
        match self.kind {
            Kind::OneD { n, a0 } => {
                let (s, q) = (p / n, p % n);
                let base = s * n;
                if q < a0 {
                    if q < a0 / 2 {
                        out[0] = base + a0 + 2 * q;
                        out[1] = out[0] + 1;
                        2
                    } else {
                        0
                    }
                } else if 2 * q < n {
                    out[0] = base + 2 * q;
                    out[1] = out[0] + 1;
                    2
                } else {
                    0
                }
            }
            Kind::TwoD { pr, pc, r0, c0 } => {
                let (i, j) = (p / pc, p % pc);
                let (bi, bj) = if i < r0 && j < c0 {
                    let (di, dj) = (i & 1, j & 1);
                    if di == 0 && dj == 0 {
                        return 0;
                    }
                    ((i & !1) + di * r0, (j & !1) + dj * c0)
                } else if 2 * i < pr && 2 * j < pc {
                    (2 * i, 2 * j)
                } else {
                    return 0;
                };
                out[0] = bi * pc + bj;
                out[1] = out[0] + 1;
                out[2] = out[0] + pc;
                out[3] = out[2] + 1;
                4
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum SetKind {
    /// All descendants.
    A,
    /// Descendants excluding the direct offspring.
    B,
}

/// Bit-level operations the traversal performs. `None` means the stream is
/// exhausted (decoder) or the budget is spent (encoder).
trait PassCoder {
    fn coeff(&mut self, p: usize, n: u32) -> Option<bool>;
    fn sign(&mut self, p: usize) -> Option<()>;
    fn set(&mut self, p: usize, n: u32, kind: SetKind) -> Option<bool>;
    fn refine(&mut self, p: usize, n: u32) -> Option<()>;
}

#[derive(Clone, Copy)]
struct LisEntry {
    node: u32,
    kind: SetKind,
    alive: bool,
}

/// Runs sorting and refinement passes from plane `top` down to 0. Returns
/// `None` if the coder stopped early.
fn traverse<C: PassCoder>(forest: &Forest, top: u32, coder: &mut C) -> Option<()> {
    let mut lip: Vec<u32> = forest
        .roots
        .iter()
        .copied()
        .filter(|&r| forest.valid(r as usize))
        .collect();
    let mut lis: Vec<LisEntry> = forest
        .roots
        .iter()
        .filter(|&&r| forest.has_desc[r as usize])
        .map(|&node| LisEntry {
            node,
            kind: SetKind::A,
            alive: true,
        })
        .collect();
    let mut lsp: Vec<u32> = Vec::new();
    let mut kids = [0usize; 4];

    for n in (0..=top).rev() {
        let refine_upto = lsp.len();

        let mut still = Vec::with_capacity(lip.len());
        for &p in &lip {
            if coder.coeff(p as usize, n)? {
                coder.sign(p as usize)?;
                lsp.push(p);
            } else {
                still.push(p);
            }
        }
        lip = still;

        let mut idx = 0;
        while idx < lis.len() {
            let LisEntry { node, kind, .. } = lis[idx];
            let p = node as usize;
            match kind {
                SetKind::A => {
                    if coder.set(p, n, SetKind::A)? {
                        let k = forest.children(p, &mut kids);
                        for &c in &kids[..k] {
                            if !forest.valid(c) {
                                continue;
                            }
                            if coder.coeff(c, n)? {
                                coder.sign(c)?;
                                lsp.push(c as u32);
                            } else {
                                lip.push(c as u32);
                            }
                        }
                        lis[idx].alive = false;
                        if forest.has_grand[p] {
                            lis.push(LisEntry {
                                node,
                                kind: SetKind::B,
                                alive: true,
                            });
                        }
                    }
                }
                SetKind::B => {
                    if coder.set(p, n, SetKind::B)? {
                        lis[idx].alive = false;
                        let k = forest.children(p, &mut kids);
                        for &c in &kids[..k] {
                            if forest.has_desc[c] {
                                lis.push(LisEntry {
                                    node: c as u32,
                                    kind: SetKind::A,
                                    alive: true,
                                });
                            }
                        }
                    }
                }
            }
            idx += 1;
        }
        lis.retain(|e| e.alive);

        for &p in &lsp[..refine_upto] {
            coder.refine(p as usize, n)?;
        }

        #[cfg(debug_assertions)]
        check_lists(forest.map.len(), &lip, &lis, &lsp);
    }
    Some(())
}

/// LIP and LSP never share a coefficient, and no list repeats an entry.
#[cfg(debug_assertions)]
fn check_lists(size: usize, lip: &[u32], lis: &[LisEntry], lsp: &[u32]) {
    let mut seen = vec![0u8; size];
    for &p in lip {
        assert_eq!(seen[p as usize], 0, "coefficient {p} listed twice");
        seen[p as usize] = 1;
    }
    for &p in lsp {
        assert_eq!(seen[p as usize], 0, "coefficient {p} in LIP and LSP");
        seen[p as usize] = 2;
    }
    let mut in_lis = vec![false; size];
    for e in lis {
        assert!(!in_lis[e.node as usize], "set {} listed twice", e.node);
        in_lis[e.node as usize] = true;
    }
}

struct Encoder<'a> {
    forest: &'a Forest,
    mag: Vec<u32>,
    neg: Vec<bool>,
    max_desc: Vec<u32>,
    max_grand: Vec<u32>,
    out: BitWriter,
}

impl PassCoder for Encoder<'_> {
    fn coeff(&mut self, p: usize, n: u32) -> Option<bool> {
        let s = self.mag[p] >> n != 0;
        self.out.put(s).ok()?;
        Some(s)
    }

    fn sign(&mut self, p: usize) -> Option<()> {
        self.out.put(self.neg[p]).ok()
    }

    fn set(&mut self, p: usize, n: u32, kind: SetKind) -> Option<bool> {
        let m = match kind {
            SetKind::A => self.max_desc[p],
            SetKind::B => self.max_grand[p],
        };
        let s = m >> n != 0;
        self.out.put(s).ok()?;
        Some(s)
    }

    fn refine(&mut self, p: usize, n: u32) -> Option<()> {
        self.out.put((self.mag[p] >> n) & 1 == 1).ok()
    }
}

/// Bit-plane index of the largest magnitude (0 for an all-zero input).
pub fn top_plane(values: &[i32]) -> u32 {
    let peak = values.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
    if peak == 0 {
        0
    } else {
        31 - peak.leading_zeros()
    }
}

/// Codes `values` (laid out per `shape`) into at most `budget_bits` bits.
pub fn encode(values: &[i32], shape: SpihtShape, budget_bits: usize) -> Result<Bitstream> {
    if budget_bits < MIN_BUDGET_BITS {
        return Err(Error::Budget(format!(
            "budget of {budget_bits} bits is below the {MIN_BUDGET_BITS}-bit minimum"
        )));
    }
    if values.len() != shape.coefficient_count() {
        return Err(Error::structure(format!(
            "{} coefficients for shape {shape:?}",
            values.len()
        )));
    }
    let forest = Forest::new(shape)?;
    let size = forest.map.len();
    let mut mag = vec![0u32; size];
    let mut neg = vec![false; size];
    for (p, &a) in forest.map.iter().enumerate() {
        if a != NONE {
            let v = values[a as usize];
            mag[p] = v.unsigned_abs();
            neg[p] = v < 0;
        }
    }
    let top = top_plane(values);
    if top > MAX_PLANE {
        return Err(Error::Range("coefficient magnitude exceeds 2^31".into()));
    }
    let mut max_desc = vec![0u32; size];
    let mut max_grand = vec![0u32; size];
    let mut kids = [0usize; 4];
    for p in (0..size).rev() {
        let k = forest.children(p, &mut kids);
        let (mut d, mut g) = (0, 0);
        for &c in &kids[..k] {
            d = d.max(mag[c]).max(max_desc[c]);
            g = g.max(max_desc[c]);
        }
        max_desc[p] = d;
        max_grand[p] = g;
    }

    let mut enc = Encoder {
        forest: &forest,
        mag,
        neg,
        max_desc,
        max_grand,
        out: BitWriter::with_cap(budget_bits),
    };
    let header: Result<(), Full> = enc.out.put_bits(u64::from(top), PLANE_BITS);
    debug_assert!(header.is_ok());
    let _ = traverse(enc.forest, top, &mut enc);
    Ok(enc.out.finish())
}

struct Decoder<'a, 'b> {
    input: BitReader<'b>,
    acc: Vec<u32>,
    /// Lowest bit plane known for each significant coefficient.
    plane: Vec<u8>,
    sign: Vec<i8>,
    _forest: &'a Forest,
}

impl PassCoder for Decoder<'_, '_> {
    fn coeff(&mut self, p: usize, n: u32) -> Option<bool> {
        let s = self.input.get()?;
        if s {
            self.acc[p] = 1 << n;
            self.plane[p] = n as u8;
        }
        Some(s)
    }

    fn sign(&mut self, p: usize) -> Option<()> {
        self.sign[p] = if self.input.get()? { -1 } else { 1 };
        Some(())
    }

    fn set(&mut self, _p: usize, _n: u32, _kind: SetKind) -> Option<bool> {
        self.input.get()
    }

    fn refine(&mut self, p: usize, n: u32) -> Option<()> {
        if self.input.get()? {
            self.acc[p] |= 1 << n;
        }
        self.plane[p] = n as u8;
        Some(())
    }
}

/// Reconstructs coefficients from a (possibly truncated) stream.
///
/// Significant coefficients are placed at the middle of their remaining
/// uncertainty interval. A stream shorter than the plane header decodes to
/// all zeros.
pub fn decode(bits: &Bitstream, shape: SpihtShape) -> Result<Vec<i32>> {
    let forest = Forest::new(shape)?;
    let mut out = vec![0i32; shape.coefficient_count()];
    let mut input = bits.reader();
    let Some(top) = input.get_bits(PLANE_BITS) else {
        return Ok(out);
    };
    let top = top as u32;
    if top > MAX_PLANE {
        return Err(Error::format(format!("initial bit plane {top} out of range")));
    }
    let size = forest.map.len();
    let mut dec = Decoder {
        input,
        acc: vec![0; size],
        plane: vec![0; size],
        sign: vec![0; size],
        _forest: &forest,
    };
    let _ = traverse(&forest, top, &mut dec);
    for (p, &a) in forest.map.iter().enumerate() {
        if a == NONE || dec.sign[p] == 0 {
            continue;
        }
        let k = u32::from(dec.plane[p]);
        let m = dec.acc[p] + if k > 0 { 1 << (k - 1) } else { 0 };
        out[a as usize] = i32::from(dec.sign[p]) * m as i32;
    }
    Ok(out)
}
