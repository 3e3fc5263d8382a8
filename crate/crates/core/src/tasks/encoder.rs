use crate::error::{shape_err, Result};
use crate::linalg::DenseMatrix;
use crate::tasks::mosaic::MosaicInstance;

/// Single linear layer with ReLU applied to each flattened tile.
#[derive(Clone, Debug, PartialEq)]
pub struct TileEncoderParams {
    /// embed_dim × tile_pixels
    pub w: DenseMatrix,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EncoderCache {
    tiles: DenseMatrix,
    pre: DenseMatrix,
}

impl TileEncoderParams {
    pub fn zeros(embed: usize, pixels: usize) -> Self {
        Self {
            w: DenseMatrix::zeros(embed, pixels),
            b: vec![0.0; embed],
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.w.rows()
    }
}

pub fn encode_tiles(params: &TileEncoderParams, instance: &MosaicInstance) -> Result<DenseMatrix> {
    Ok(encode(params, &instance.tiles)?.0)
}

/// `relu(tiles · Wᵀ + b)`, one feature row per tile.
pub fn encode(params: &TileEncoderParams, tiles: &DenseMatrix) -> Result<(DenseMatrix, EncoderCache)> {
    if tiles.cols() != params.w.cols() || params.b.len() != params.w.rows() {
        return Err(shape_err(
            "encode_tiles",
            format!("{} pixels per tile", params.w.cols()),
            tiles.cols(),
        ));
    }
    let mut pre = tiles.matmul_nt(&params.w)?;
    for i in 0..pre.rows() {
        for (v, b) in pre.row_mut(i).iter_mut().zip(&params.b) {
            *v += b;
        }
    }
    let features = pre.map(|v| v.max(0.0));
    Ok((
        features,
        EncoderCache {
            tiles: tiles.clone(),
            pre,
        },
    ))
}

/// Weight and bias gradients for upstream feature gradients.
pub fn encode_vjp(cache: &EncoderCache, d_features: &DenseMatrix) -> Result<TileEncoderParams> {
    d_features.ensure_shape("encode_vjp", cache.pre.rows(), cache.pre.cols())?;
    let mut d_pre = d_features.clone();
    for (g, &p) in d_pre.data_mut().iter_mut().zip(cache.pre.data()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    let w = d_pre.matmul_tn(&cache.tiles)?;
    let mut b = vec![0.0; d_pre.cols()];
    for i in 0..d_pre.rows() {
        for (acc, g) in b.iter_mut().zip(d_pre.row(i)) {
            *acc += g;
        }
    }
    Ok(TileEncoderParams { w, b })
}
