//! Cubic complex grids and the two transposition phases of the pipeline.

use std::ops::{Index, IndexMut};

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::numerics::ComplexSample;

/// An `n × n × n` complex grid stored with `x` fastest:
/// `index(x, y, z) = x + n·y + n²·z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<ComplexSample>,
}

fn check_edge(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(contract(format!("tensor edge must be a power of two, got {n}")));
    }
    n.checked_pow(3)
        .ok_or_else(|| contract(format!("tensor edge {n} overflows the address space")))?;
    Ok(())
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Result<Self> {
        check_edge(n)?;
        Ok(Tensor3 { n, data: vec![ComplexSample::new(0.0, 0.0); n * n * n] })
    }

    pub fn from_vec(n: usize, data: Vec<ComplexSample>) -> Result<Self> {
        check_edge(n)?;
        if data.len() != n * n * n {
            return Err(contract(format!("{n}^3 tensor given {} samples", data.len())));
        }
        Ok(Tensor3 { n, data })
    }

    /// Builds a tensor by evaluating `f(x, y, z)` at every grid point.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> ComplexSample) -> Result<Self> {
        check_edge(n)?;
        let mut data = Vec::with_capacity(n * n * n);
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    data.push(f(x, y, z));
                }
            }
        }
        Ok(Tensor3 { n, data })
    }

    /// Components drawn uniformly from `[-1, 1)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::from_fn(n, |_, _, _| ComplexSample::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.n * (y + self.n * z)
    }

    /// Inverse of [`Tensor3::index_of`].
    pub fn coords_of(&self, i: usize) -> (usize, usize, usize) {
        (i % self.n, (i / self.n) % self.n, i / (self.n * self.n))
    }

    pub fn data(&self) -> &[ComplexSample] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [ComplexSample] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<ComplexSample> {
        self.data
    }

    pub fn map(&self, f: impl Fn(ComplexSample) -> ComplexSample) -> Tensor3 {
        Tensor3 { n: self.n, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = ComplexSample;

    fn index(&self, (x, y, z): (usize, usize, usize)) -> &ComplexSample {
        &self.data[self.index_of(x, y, z)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (x, y, z): (usize, usize, usize)) -> &mut ComplexSample {
        let i = self.index_of(x, y, z);
        &mut self.data[i]
    }
}

/// Blocking of the 2D transpose: tiles of `tile × tile` samples staged
/// round-robin through `buffers` buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileConfig {
    pub tile: usize,
    pub buffers: usize,
}

impl Default for TileConfig {
    /// Tile edge matches the 8-lane kernel width; two buffers double-buffer the stream.
    fn default() -> Self {
        TileConfig { tile: 8, buffers: 2 }
    }
}

impl TileConfig {
    pub fn new(tile: usize, buffers: usize) -> Result<Self> {
        let cfg = TileConfig { tile, buffers };
        if tile == 0 || buffers < 2 {
            return Err(Error::Configuration(format!(
                "tile must be positive and buffers >= 2, got tile {tile}, buffers {buffers}"
            )));
        }
        Ok(cfg)
    }

    /// Default configuration clamped so that the tile divides `n`.
    pub fn for_size(n: usize) -> Self {
        let d = TileConfig::default();
        TileConfig { tile: d.tile.min(n.max(1)), ..d }
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.tile == 0 || self.buffers < 2 {
            return Err(Error::Configuration(format!(
                "tile must be positive and buffers >= 2, got tile {}, buffers {}",
                self.tile, self.buffers
            )));
        }
        if !n.is_multiple_of(self.tile) {
            return Err(Error::Configuration(format!("tile {} does not divide n = {n}", self.tile)));
        }
        Ok(())
    }
}

/// Reusable staging buffers for [`transpose_plane_into`].
#[derive(Debug)]
pub(crate) struct Staging {
    buffers: Vec<Vec<ComplexSample>>,
}

impl Staging {
    pub(crate) fn new(cfg: &TileConfig) -> Self {
        Staging { buffers: vec![vec![ComplexSample::new(0.0, 0.0); cfg.tile * cfg.tile]; cfg.buffers] }
    }
}

/// Transposes the `n × n` row-major plane `src` into `dst`, tile by tile.
/// Each tile is loaded into the next staging buffer and written back
/// transposed.
pub(crate) fn transpose_plane_into(
    src: &[ComplexSample],
    dst: &mut [ComplexSample],
    n: usize,
    cfg: &TileConfig,
    staging: &mut Staging,
) {
    let tile = cfg.tile;
    let tiles = n / tile;
    for t in 0..tiles * tiles {
        let (ti, tj) = ((t / tiles) * tile, (t % tiles) * tile);
        let buf = &mut staging.buffers[t % cfg.buffers];
        for r in 0..tile {
            let row = (ti + r) * n + tj;
            buf[r * tile..(r + 1) * tile].copy_from_slice(&src[row..row + tile]);
        }
        for c in 0..tile {
            let out_row = (tj + c) * n + ti;
            for r in 0..tile {
                dst[out_row + r] = buf[r * tile + c];
            }
        }
    }
}

/// Transpose of an `n × n` row-major plane: `out[i][j] = in[j][i]`.
///
/// The tile configuration changes only how the copy is staged, never the result.
pub fn transpose2d(plane: &[ComplexSample], n: usize, cfg: &TileConfig) -> Result<Vec<ComplexSample>> {
    if plane.len() != n * n {
        return Err(contract(format!("{n}x{n} plane given {} samples", plane.len())));
    }
    cfg.validate_for(n)?;
    let mut out = vec![ComplexSample::new(0.0, 0.0); n * n];
    transpose_plane_into(plane, &mut out, n, cfg, &mut Staging::new(cfg));
    Ok(out)
}

/// Applies [`transpose2d`] to every `z` slab: `out(x, y, z) = in(y, x, z)`.
pub fn transpose_planes(t: &Tensor3, cfg: &TileConfig) -> Result<Tensor3> {
    let n = t.n;
    cfg.validate_for(n)?;
    let mut out = Tensor3::zeros(n)?;
    let mut staging = Staging::new(cfg);
    for (src, dst) in t.data.chunks_exact(n * n).zip(out.data.chunks_exact_mut(n * n)) {
        transpose_plane_into(src, dst, n, cfg, &mut staging);
    }
    Ok(out)
}

/// Cyclic axis rotation `(x, y, z) -> (z, x, y)`, i.e.
/// `out(x', y', z') = in(y', z', x')`: the former `z` axis becomes the
/// fastest-varying one. Three applications give back the input.
pub fn transpose3d_zx(t: &Tensor3) -> Tensor3 {
    let n = t.n;
    let mut data = Vec::with_capacity(t.data.len());
    for zp in 0..n {
        for yp in 0..n {
            for xp in 0..n {
                data.push(t.data[yp + n * (zp + n * xp)]);
            }
        }
    }
    Tensor3 { n, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> ComplexSample {
        ComplexSample::new(re, -re)
    }

    fn bitwise_eq(a: &[ComplexSample], b: &[ComplexSample]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
    }

    #[test]
    fn two_by_two() {
        let plane = [c(1.0), c(2.0), c(3.0), c(4.0)];
        let cfg = TileConfig::new(1, 2).unwrap();
        assert_eq!(transpose2d(&plane, 2, &cfg).unwrap(), vec![c(1.0), c(3.0), c(2.0), c(4.0)]);
        let cfg = TileConfig::new(2, 2).unwrap();
        assert_eq!(transpose2d(&plane, 2, &cfg).unwrap(), vec![c(1.0), c(3.0), c(2.0), c(4.0)]);
    }

    #[test]
    fn symmetric_plane_is_fixed() {
        let n = 16;
        let plane: Vec<_> = (0..n * n).map(|i| if i / n == i % n { c(1.0) } else { c(0.0) }).collect();
        assert_eq!(transpose2d(&plane, n, &TileConfig::default()).unwrap(), plane);
    }

    #[test]
    fn tile_must_divide() {
        let plane = vec![c(0.0); 144];
        assert!(matches!(transpose2d(&plane, 12, &TileConfig::default()), Err(Error::Configuration(_))));
        assert!(TileConfig::new(4, 1).is_err());
        assert!(TileConfig::new(0, 2).is_err());
        assert!(transpose2d(&plane[..10], 12, &TileConfig::new(4, 2).unwrap()).is_err());
    }

    #[test]
    fn rotation_index_map_n2() {
        let t = Tensor3::from_fn(2, |x, y, z| ComplexSample::new((x + 2 * y + 4 * z) as f64, 0.0)).unwrap();
        let r = transpose3d_zx(&t);
        for z in 0..2 {
            for y in 0..2 {
                for x in 0..2 {
                    // out(x', y', z') = in(y', z', x') = y' + 2z' + 4x'
                    assert_eq!(r[(x, y, z)].re, (y + 2 * z + 4 * x) as f64);
                }
            }
        }
    }

    #[test]
    fn constant_tensor_is_fixed() {
        let t = Tensor3::from_fn(4, |_, _, _| c(3.5)).unwrap();
        assert_eq!(transpose3d_zx(&t), t);
    }

    #[test]
    fn rotation_has_order_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Tensor3::random(8, &mut rng).unwrap();
        let once = transpose3d_zx(&t);
        assert_ne!(once, t);
        let thrice = transpose3d_zx(&transpose3d_zx(&once));
        assert!(bitwise_eq(thrice.data(), t.data()));
    }

    #[test]
    fn plane_transpose_swaps_x_and_y() {
        let t = Tensor3::from_fn(8, |x, y, z| ComplexSample::new((x + 8 * y) as f64, z as f64)).unwrap();
        let p = transpose_planes(&t, &TileConfig::new(4, 3).unwrap()).unwrap();
        for (i, v) in p.data().iter().enumerate() {
            let (x, y, z) = p.coords_of(i);
            assert_eq!(*v, t[(y, x, z)]);
        }
    }

    #[test]
    fn tensor_constructors_validate() {
        assert!(Tensor3::zeros(0).is_err());
        assert!(Tensor3::zeros(6).is_err());
        assert!(Tensor3::from_vec(2, vec![c(0.0); 7]).is_err());
        let t = Tensor3::zeros(4).unwrap();
        assert_eq!(t.coords_of(t.index_of(1, 2, 3)), (1, 2, 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn transpose_is_an_involution_for_any_tiling(
            seed in any::<u64>(), log_n in 0u32..=6, log_tile in 0u32..=6, buffers in 2usize..=4,
        ) {
            let n = 1usize << log_n;
            let tile = 1usize << log_tile.min(log_n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plane: Vec<_> = (0..n * n).map(|_| ComplexSample::new(rng.gen(), rng.gen())).collect();
            let cfg = TileConfig::new(tile, buffers).unwrap();
            let once = transpose2d(&plane, n, &cfg).unwrap();
            let reference = transpose2d(&plane, n, &TileConfig::new(1, 2).unwrap()).unwrap();
            prop_assert!(bitwise_eq(&once, &reference));
            prop_assert!(bitwise_eq(&transpose2d(&once, n, &cfg).unwrap(), &plane));
        }
    }
}
