//! Fixture formats and seeded random objects.

use std::io::{Read, Write};
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blockmat::{BlockMatrix, BlockShape};
use crate::error::{KamError, Result};
use crate::fourier::Series;
use crate::jets::Jet;
use crate::lattice;
use crate::C64;

const MAGIC: &[u8; 8] = b"KLBMAT01";

/// Binary dump: magic, `W_max` (u32), `beta` (f64), flags (u32: bit 0
/// symmetric, bit 1 complex), comp (u32), level count and sizes (u32 each),
/// then per block `a`, `b` (u32) and row-major little-endian f64 values.
/// A trailing `u32::MAX` ends the list.
pub fn write_blockmat<W: Write>(w: &mut W, m: &BlockMatrix<f64>, beta: f64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&m.shape.w_max.to_le_bytes())?;
    w.write_all(&beta.to_le_bytes())?;
    let flags: u32 = if m.symmetric { 1 } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&(m.comp as u32).to_le_bytes())?;
    w.write_all(&(m.shape.n_levels() as u32).to_le_bytes())?;
    for l in 0..m.shape.n_levels() {
        w.write_all(&m.shape.level_w[l].to_le_bytes())?;
        w.write_all(&(m.shape.sizes[l] as u32).to_le_bytes())?;
    }
    for (&(a, b), blk) in &m.blocks {
        w.write_all(&(a as u32).to_le_bytes())?;
        w.write_all(&(b as u32).to_le_bytes())?;
        for x in blk.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.write_all(&u32::MAX.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Returns the matrix and the stored `beta`.
pub fn read_blockmat<R: Read>(r: &mut R) -> Result<(BlockMatrix<f64>, f64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(KamError::Layout("not a block matrix dump".into()));
    }
    let w_max = read_u32(r)?;
    let beta = read_f64(r)?;
    let flags = read_u32(r)?;
    if flags & 2 != 0 {
        return Err(KamError::Layout("complex dumps are not supported".into()));
    }
    let comp = read_u32(r)? as usize;
    let nl = read_u32(r)? as usize;
    let mut level_w = Vec::with_capacity(nl);
    let mut sizes = Vec::with_capacity(nl);
    for _ in 0..nl {
        level_w.push(read_u32(r)?);
        sizes.push(read_u32(r)? as usize);
    }
    let mut offsets = Vec::with_capacity(nl);
    let mut o = 0;
    for s in &sizes {
        offsets.push(o);
        o += s;
    }
    let shape = Arc::new(BlockShape {
        weights: level_w.iter().map(|&w| w.max(1) as f64).collect(),
        sizes,
        level_w,
        offsets,
        w_max,
    });
    let mut m = BlockMatrix::zeros(&shape, comp);
    m.symmetric = flags & 1 != 0;
    loop {
        let a = read_u32(r)?;
        if a == u32::MAX {
            break;
        }
        let b = read_u32(r)? as usize;
        let a = a as usize;
        if a >= nl || b >= nl {
            return Err(KamError::Layout(format!("block ({a}, {b}) out of range")));
        }
        let (ra, cb) = m.block_dims(a, b);
        let mut data = Vec::with_capacity(ra * cb);
        for _ in 0..ra * cb {
            data.push(read_f64(r)?);
        }
        m.set_block(a, b, Array2::from_shape_vec((ra, cb), data).unwrap())?;
    }
    Ok((m, beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetTerm {
    pub k: Vec<i32>,
    pub part: String,
    /// Row-major `[re, im]` pairs.
    pub data: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetFixture {
    pub n: usize,
    #[serde(rename = "K_max")]
    pub k_max: u32,
    pub terms: Vec<JetTerm>,
}

const PARTS: [&str; 4] = ["theta", "r", "zeta", "zetazeta"];

impl JetFixture {
    pub fn from_jet(j: &Jet, k_max: u32) -> Self {
        let mut terms = Vec::new();
        for (name, s) in PARTS.iter().zip(j.parts()) {
            for (k, c) in &s.coeffs {
                terms.push(JetTerm {
                    k: k.clone(),
                    part: name.to_string(),
                    data: c.iter().map(|z| [z.re, z.im]).collect(),
                });
            }
        }
        JetFixture { n: j.n, k_max, terms }
    }

    pub fn to_jet(&self, shape: &Arc<BlockShape>) -> Result<Jet> {
        let mut j = Jet::zeros(self.n, shape);
        let d = j.dim();
        for t in &self.terms {
            if t.k.len() != self.n {
                return Err(KamError::Layout(format!("wavevector {:?} has wrong length", t.k)));
            }
            let (target, rows, cols) = match t.part.as_str() {
                "theta" => (&mut j.theta, 1, 1),
                "r" => (&mut j.r, self.n, 1),
                "zeta" => (&mut j.z, d, 1),
                "zetazeta" => (&mut j.zz, d, d),
                p => return Err(KamError::Layout(format!("unknown part {p}"))),
            };
            if t.data.len() != rows * cols {
                return Err(KamError::Layout(format!("part {} has {} entries, expected {}", t.part, t.data.len(), rows * cols)));
            }
            let m = Array2::from_shape_vec((rows, cols), t.data.iter().map(|p| C64::new(p[0], p[1])).collect()).unwrap();
            target.add_at(&t.k, &m);
        }
        Ok(j)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn cnormal<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
}

fn random_series<R: Rng>(rng: &mut R, n: usize, rows: usize, cols: usize, kmax: u32, decay: f64, sym: bool) -> Series {
    let mut s = Series::zeros(n, rows, cols);
    for k in lattice::l1_ball(n, kmax) {
        let first = k.iter().find(|&&v| v != 0).copied();
        if matches!(first, Some(v) if v < 0) {
            continue;
        }
        let zero = first.is_none();
        let f = (-decay * lattice::l1(&k) as f64).exp();
        let mut m = Array2::from_shape_fn((rows, cols), |_| cnormal(rng) * f);
        if zero {
            m.mapv_inplace(|z| C64::new(z.re, 0.0));
        }
        if sym {
            let t = m.t().to_owned();
            m = (&m + &t).mapv(|z| z * 0.5);
        }
        if !zero {
            s.add_at(&lattice::neg(&k), &m.mapv(|z| z.conj()));
        }
        s.add_at(&k, &m);
    }
    s
}

/// Real jet with entries of size about `scale e^{-decay |k|}` for `|k|_1 <= kmax`.
pub fn random_jet<R: Rng>(rng: &mut R, n: usize, shape: &Arc<BlockShape>, kmax: u32, scale: f64, decay: f64) -> Jet {
    let d = 2 * shape.n_modes();
    let mut j = Jet::zeros(n, shape);
    j.theta = random_series(rng, n, 1, 1, kmax, decay, false);
    j.r = random_series(rng, n, n, 1, kmax, decay, false);
    j.z = random_series(rng, n, d, 1, kmax, decay, false);
    j.zz = random_series(rng, n, d, d, kmax, decay, true);
    j.scale(scale)
}

/// Real jet supported on the listed parts only.
pub fn random_jet_parts<R: Rng>(rng: &mut R, n: usize, shape: &Arc<BlockShape>, kmax: u32, scale: f64, parts: [bool; 4]) -> Jet {
    let mut j = random_jet(rng, n, shape, kmax, scale, 0.5);
    let e = Jet::zeros(n, shape);
    if !parts[0] {
        j.theta = e.theta.clone();
    }
    if !parts[1] {
        j.r = e.r.clone();
    }
    if !parts[2] {
        j.z = e.z.clone();
    }
    if !parts[3] {
        j.zz = e.zz.clone();
    }
    j
}

/// Symmetric block matrix with every block present.
pub fn random_blockmat<R: Rng>(rng: &mut R, shape: &Arc<BlockShape>, scale: f64) -> BlockMatrix<f64> {
    let d = 2 * shape.n_modes();
    let m = Array2::from_shape_fn((d, d), |_| (rng.random::<f64>() * 2.0 - 1.0) * scale);
    let s = (&m + &m.t()) * 0.5;
    let mut out = BlockMatrix::from_dense(shape, 2, s.view()).unwrap();
    out.symmetric = true;
    out
}

/// Random normal-form matrix of the given size.
pub fn random_normal_form<R: Rng>(rng: &mut R, shape: &Arc<BlockShape>, scale: f64) -> BlockMatrix<f64> {
    let mut b = random_blockmat(rng, shape, scale).nf_project();
    b.symmetric = true;
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{Clustering, SpectralModel};
    use rand::SeedableRng;

    #[test]
    fn blockmat_round_trip() {
        let shape = BlockShape::new(&Clustering::enumerate(&SpectralModel::kg(1.0, 1.0, 1), 3).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = random_blockmat(&mut rng, &shape, 1.0);
        let mut buf = Vec::new();
        write_blockmat(&mut buf, &m, 0.25).unwrap();
        let (back, beta) = read_blockmat(&mut buf.as_slice()).unwrap();
        assert_eq!(beta, 0.25);
        assert_eq!(back.to_dense(), m.to_dense());
        assert!(read_blockmat(&mut &buf[1..]).is_err());
    }

    #[test]
    fn jet_round_trip() {
        let shape = BlockShape::new(&Clustering::enumerate(&SpectralModel::qho(2), 2).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let j = random_jet(&mut rng, 2, &shape, 2, 1.0, 0.5);
        let fx = JetFixture::from_jet(&j, 2);
        let back = JetFixture::from_json(&fx.to_json()).unwrap().to_jet(&shape).unwrap();
        assert_eq!(back.max_abs_diff(&j), 0.0);
        assert!(j.reality_defect() < 1e-15);
    }
}
