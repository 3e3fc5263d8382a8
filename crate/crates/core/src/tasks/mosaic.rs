//! Image mosaics: cutting images into grid tiles, shuffling them, and the
//! synthetic image families used when no IDX data is available.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, HardPermutation};
use crate::tasks::idx::Normalisation;
use crate::tasks::sort::Split;

/// Row-major grey-scale image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} pixels for a {rows}x{cols} image",
                pixels.len()
            )));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MosaicSource {
    Idx,
    Synthetic,
}

/// A shuffled set of tiles with the arrangement that restores the image.
#[derive(Clone, Debug, PartialEq)]
pub struct MosaicInstance {
    /// One flattened tile per row, in presentation order.
    pub tiles: DenseMatrix,
    /// `truth.element_at(k)` is the presented tile belonging at grid position `k`
    /// (positions row-major).
    pub truth: HardPermutation,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub source: MosaicSource,
}

impl MosaicInstance {
    pub fn len(&self) -> usize {
        self.tiles.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.rows() == 0
    }

    /// Tiles in their correct grid order.
    pub fn target(&self) -> DenseMatrix {
        self.truth.apply(&self.tiles)
    }

    /// Places presented tile `perm.element_at(k)` at grid position `k`.
    pub fn reassemble(&self, perm: &HardPermutation) -> Image {
        let rows = self.grid_rows * self.tile_rows;
        let cols = self.grid_cols * self.tile_cols;
        let mut pixels = vec![0.0; rows * cols];
        for k in 0..self.len() {
            let tile = self.tiles.row(perm.element_at(k));
            let (gr, gc) = (k / self.grid_cols, k % self.grid_cols);
            for r in 0..self.tile_rows {
                let dst = (gr * self.tile_rows + r) * cols + gc * self.tile_cols;
                pixels[dst..dst + self.tile_cols]
                    .copy_from_slice(&tile[r * self.tile_cols..(r + 1) * self.tile_cols]);
            }
        }
        Image { rows, cols, pixels }
    }
}

/// Nearest-neighbour upscale to the smallest size divisible by the grid.
pub fn upscale_to_divisible(image: &Image, grid_rows: usize, grid_cols: usize) -> Image {
    let rows = image.rows.div_ceil(grid_rows) * grid_rows;
    let cols = image.cols.div_ceil(grid_cols) * grid_cols;
    if rows == image.rows && cols == image.cols {
        return image.clone();
    }
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let sr = r * image.rows / rows;
        for c in 0..cols {
            pixels.push(image.at(sr, c * image.cols / cols));
        }
    }
    Image { rows, cols, pixels }
}

/// Cuts `image` into a grid and presents the tiles in a seeded random order.
pub fn make_mosaic(image: &Image, grid_rows: usize, grid_cols: usize, seed: u64) -> Result<MosaicInstance> {
    let mut order: Vec<usize> = (0..grid_rows * grid_cols).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    make_mosaic_with_order(image, grid_rows, grid_cols, &order)
}

/// As [`make_mosaic`] with an explicit presentation order: presented tile
/// `j` is the tile from grid position `order[j]`.
pub fn make_mosaic_with_order(
    image: &Image,
    grid_rows: usize,
    grid_cols: usize,
    order: &[usize],
) -> Result<MosaicInstance> {
    if grid_rows == 0 || grid_cols == 0 || image.rows < grid_rows || image.cols < grid_cols {
        return Err(Error::InvalidArgument(format!(
            "cannot cut a {}x{} image into a {grid_rows}x{grid_cols} grid",
            image.rows, image.cols
        )));
    }
    let presented = HardPermutation::new(order.to_vec())?;
    if presented.len() != grid_rows * grid_cols {
        return Err(Error::InvalidArgument("presentation order has the wrong length".into()));
    }
    let image = upscale_to_divisible(image, grid_rows, grid_cols);
    let tile_rows = image.rows / grid_rows;
    let tile_cols = image.cols / grid_cols;

    let n = grid_rows * grid_cols;
    let mut tiles = DenseMatrix::zeros(n, tile_rows * tile_cols);
    for (j, &k) in order.iter().enumerate() {
        let (gr, gc) = (k / grid_cols, k % grid_cols);
        let dst = tiles.row_mut(j);
        for r in 0..tile_rows {
            let src = (gr * tile_rows + r) * image.cols + gc * tile_cols;
            dst[r * tile_cols..(r + 1) * tile_cols].copy_from_slice(&image.pixels[src..src + tile_cols]);
        }
    }
    Ok(MosaicInstance {
        tiles,
        truth: presented.inverse(),
        grid_rows,
        grid_cols,
        tile_rows,
        tile_cols,
        source: MosaicSource::Synthetic,
    })
}

/// Synthetic image families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticStyle {
    /// A smooth linear ramp plus one bright Gaussian blob.
    GradientBlob,
    /// As `GradientBlob`, then two of the four quadrants set to the same
    /// constant, so those two tiles are identical.
    BlankQuadrants,
}

pub const SYNTHETIC_SIZE: usize = 28;

/// Deterministic synthetic image `index` of `split` under `seed`.
pub fn synthetic_image(seed: u64, split: Split, index: u64, style: SyntheticStyle) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_7361_6963_0000 ^ split_tag(split));
    rng.set_stream(index);
    let n = SYNTHETIC_SIZE;
    let scale = (n - 1) as f64;
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let slope = rng.gen_range(0.6..1.2);
    let (gy, gx) = (slope * angle.sin(), slope * angle.cos());
    let offset = rng.gen_range(-0.2..0.2);
    let (cy, cx) = (rng.gen_range(0.0..scale), rng.gen_range(0.0..scale));
    let sigma = rng.gen_range(2.5..5.0);
    let amp = rng.gen_range(1.0..2.0);

    let mut pixels = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let (y, x) = (r as f64, c as f64);
            let ramp = offset + gy * (y / scale - 0.5) + gx * (x / scale - 0.5);
            let d2 = (y - cy).powi(2) + (x - cx).powi(2);
            pixels.push(ramp + amp * (-d2 / (2.0 * sigma * sigma)).exp());
        }
    }

    if style == SyntheticStyle::BlankQuadrants {
        const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let (a, b) = PAIRS[rng.gen_range(0..PAIRS.len())];
        let half = n / 2;
        for q in [a, b] {
            let (r0, c0) = ((q / 2) * half, (q % 2) * half);
            for r in r0..r0 + half {
                for c in c0..c0 + half {
                    pixels[r * n + c] = 0.0;
                }
            }
        }
    }
    Image {
        rows: n,
        cols: n,
        pixels,
    }
}

fn split_tag(split: Split) -> u64 {
    match split {
        Split::Train => 1,
        Split::Validation => 2,
        Split::Test => 3,
    }
}

/// Mean and standard deviation over every pixel of `images`.
pub fn image_stats(images: &[Image]) -> Normalisation {
    let count: usize = images.iter().map(|i| i.pixels.len()).sum();
    let n = count.max(1) as f64;
    let mean = images.iter().flat_map(|i| &i.pixels).sum::<f64>() / n;
    let var = images
        .iter()
        .flat_map(|i| &i.pixels)
        .map(|p| (p - mean) * (p - mean))
        .sum::<f64>()
        / n;
    Normalisation { mean, std: var.sqrt() }
}

pub fn normalise_images(images: &mut [Image], norm: Normalisation) {
    let std = if norm.std > 0.0 { norm.std } else { 1.0 };
    for p in images.iter_mut().flat_map(|i| i.pixels.iter_mut()) {
        *p = (*p - norm.mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize) -> Image {
        Image::new(rows, cols, (0..rows * cols).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn quarters() {
        let m = make_mosaic(&ramp(28, 28), 2, 2, 0).unwrap();
        assert_eq!(m.tiles.shape(), (4, 196));
        assert_eq!((m.tile_rows, m.tile_cols), (14, 14));
    }

    #[test]
    fn three_by_three_upscales() {
        let m = make_mosaic(&ramp(28, 28), 3, 3, 0).unwrap();
        assert_eq!(m.tiles.shape(), (9, 100));
        let up = upscale_to_divisible(&ramp(28, 28), 3, 3);
        assert_eq!((up.rows, up.cols), (30, 30));
        // Nearest neighbour: output row r samples source row floor(r·28/30).
        assert_eq!(up.at(29, 29), ramp(28, 28).at(27, 27));
        assert_eq!(up.at(15, 0), ramp(28, 28).at(14, 0));
    }

    #[test]
    fn identity_order() {
        let m = make_mosaic_with_order(&ramp(4, 4), 2, 2, &[0, 1, 2, 3]).unwrap();
        assert_eq!(m.truth, HardPermutation::identity(4));
        assert_eq!(m.tiles.row(1), &[2.0, 3.0, 6.0, 7.0]);
    }

    #[test]
    fn unshuffle_restores_image() {
        let img = ramp(28, 28);
        for seed in 0..5 {
            let m = make_mosaic(&img, 2, 2, seed).unwrap();
            assert_eq!(m.reassemble(&m.truth), img);
        }
        let m = make_mosaic(&img, 3, 3, 7).unwrap();
        assert_eq!(m.reassemble(&m.truth), upscale_to_divisible(&img, 3, 3));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(make_mosaic(&ramp(1, 5), 2, 2, 0).is_err());
        assert!(make_mosaic(&ramp(4, 4), 0, 2, 0).is_err());
        assert!(make_mosaic_with_order(&ramp(4, 4), 2, 2, &[0, 1, 2]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn blank_quadrants_are_identical_tiles() {
        for i in 0..10 {
            let img = synthetic_image(3, Split::Train, i, SyntheticStyle::BlankQuadrants);
            let m = make_mosaic(&img, 2, 2, i).unwrap();
            let blank: Vec<usize> = (0..4).filter(|&j| m.tiles.row(j).iter().all(|&p| p == 0.0)).collect();
            assert_eq!(blank.len(), 2);
        }
    }

    #[test]
    fn synthetic_tiles_are_distinct() {
        for i in 0..20 {
            let img = synthetic_image(3, Split::Train, i, SyntheticStyle::GradientBlob);
            assert_eq!(img, synthetic_image(3, Split::Train, i, SyntheticStyle::GradientBlob));
            let m = make_mosaic(&img, 2, 2, i).unwrap();
            for a in 0..4 {
                for b in a + 1..4 {
                    assert_ne!(m.tiles.row(a), m.tiles.row(b));
                }
            }
        }
    }
}
