//! Video tensors and their flat matrix form.
//!
//! A [`VideoTensor`] stores `T` frames of `width × height` pixels with `c`
//! interleaved channels. Flattening turns every frame into one row of a
//! `T × d` real matrix with `d = width · height · channels`, keeping the
//! temporal order of the rows.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{DprpError, Result};

/// Spatial layout of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameShape {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
}

impl FrameShape {
    pub fn new(width: u32, height: u32, channels: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DprpError::InvalidDimension(format!(
                "frame size {width}x{height} must be at least 1x1"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(DprpError::UnsupportedChannelCount(channels));
        }
        Ok(Self { width, height, channels })
    }

    /// Number of intensities in one frame, `d = w · h · c`.
    pub fn dim(&self) -> usize {
        self.width as usize * self.height as usize * self.channels as usize
    }
}

/// A `T × w × h × c` tensor of 8-bit intensities.
///
/// Storage is frame-major, row-major inside a frame and channel-interleaved
/// inside a pixel, so frame `t` is the contiguous slice
/// `data[t·d .. (t+1)·d]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoTensor {
    frames: usize,
    shape: FrameShape,
    data: Vec<u8>,
}

impl VideoTensor {
    pub fn new(frames: usize, shape: FrameShape, data: Vec<u8>) -> Result<Self> {
        if frames == 0 {
            return Err(DprpError::InvalidDimension("a video needs at least one frame".into()));
        }
        let shape = FrameShape::new(shape.width, shape.height, shape.channels)?;
        let expected = frames * shape.dim();
        if data.len() != expected {
            return Err(DprpError::ShapeMismatch(format!(
                "{} intensities for {frames} frames of {}x{}x{} (expected {expected})",
                data.len(),
                shape.width,
                shape.height,
                shape.channels
            )));
        }
        Ok(Self { frames, shape, data })
    }

    /// A tensor of zeros.
    pub fn zeros(frames: usize, shape: FrameShape) -> Result<Self> {
        Self::new(frames, shape, vec![0; frames * shape.dim()])
    }

    /// Builds a tensor from `f(frame, x, y, channel)`.
    pub fn from_fn(
        frames: usize,
        shape: FrameShape,
        mut f: impl FnMut(usize, usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let (w, h, c) = (shape.width as usize, shape.height as usize, shape.channels as usize);
        let mut data = Vec::with_capacity(frames * shape.dim());
        for t in 0..frames {
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        data.push(f(t, x, y, ch));
                    }
                }
            }
        }
        Self::new(frames, shape, data)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn shape(&self) -> FrameShape {
        self.shape
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        let d = self.shape.dim();
        &self.data[t * d..(t + 1) * d]
    }

    pub fn pixel(&self, t: usize, x: usize, y: usize, ch: usize) -> u8 {
        let (w, c) = (self.shape.width as usize, self.shape.channels as usize);
        self.frame(t)[(y * w + x) * c + ch]
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

/// The `T × d` real matrix form of a video.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatVideo {
    values: Mat<f64>,
    shape: FrameShape,
}

impl FlatVideo {
    pub fn new(values: Mat<f64>, shape: FrameShape) -> Result<Self> {
        if values.ncols() != shape.dim() {
            return Err(DprpError::ShapeMismatch(format!(
                "{} columns for a {}x{}x{} frame (d = {})",
                values.ncols(),
                shape.width,
                shape.height,
                shape.channels,
                shape.dim()
            )));
        }
        Ok(Self { values, shape })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape_tag(&self) -> FrameShape {
        self.shape
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.values
    }

    pub fn into_values(self) -> Mat<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    /// Sum of squared entries.
    pub fn squared_norm(&self) -> f64 {
        let n = self.values.norm_l2();
        n * n
    }
}

/// Lays every frame out as one row of a `T × d` matrix.
pub fn flatten(video: &VideoTensor) -> FlatVideo {
    let d = video.shape.dim();
    let values = Mat::from_fn(video.frames, d, |t, j| f64::from(video.data[t * d + j]));
    FlatVideo { values, shape: video.shape }
}

/// Inverse of [`flatten`]. Values are rounded half away from zero; anything
/// still outside `[0, 255]` saturates (NaN maps to 0).
pub fn reshape(flat: &FlatVideo) -> Result<VideoTensor> {
    if flat.cols() != flat.shape.dim() {
        return Err(DprpError::ShapeMismatch(format!(
            "{} columns cannot be reshaped to {}x{}x{}",
            flat.cols(),
            flat.shape.width,
            flat.shape.height,
            flat.shape.channels
        )));
    }
    let (rows, d) = (flat.rows(), flat.cols());
    let mut data = Vec::with_capacity(rows * d);
    for t in 0..rows {
        for j in 0..d {
            // `as u8` saturates and maps NaN to 0.
            data.push(flat.values[(t, j)].round() as u8);
        }
    }
    VideoTensor::new(rows, flat.shape, data)
}

/// Maps every value to `min(255, max(0, value))`.
pub fn clamp_pixels(flat: &FlatVideo) -> FlatVideo {
    let values = Mat::from_fn(flat.rows(), flat.cols(), |i, j| flat.values[(i, j)].clamp(0.0, 255.0));
    FlatVideo { values, shape: flat.shape }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape(w: u32, h: u32, c: u32) -> FrameShape {
        FrameShape::new(w, h, c).unwrap()
    }

    #[test]
    fn single_pixel_layout() {
        let v = VideoTensor::new(1, shape(1, 1, 3), vec![7, 9, 11]).unwrap();
        let f = flatten(&v);
        assert_eq!((f.rows(), f.cols()), (1, 3));
        assert_eq!([f.get(0, 0), f.get(0, 1), f.get(0, 2)], [7.0, 9.0, 11.0]);
    }

    #[test]
    fn zero_frames_flatten_to_zero_matrix() {
        let v = VideoTensor::zeros(2, shape(4, 3, 3)).unwrap();
        let f = flatten(&v);
        assert_eq!((f.rows(), f.cols()), (2, 36));
        assert_eq!(f.squared_norm(), 0.0);
    }

    #[test]
    fn full_resolution_dimension() {
        let s = shape(320, 240, 3);
        assert_eq!(s.dim(), 230_400);
        let v = VideoTensor::zeros(16, s).unwrap();
        let f = flatten(&v);
        assert_eq!((f.rows(), f.cols()), (16, 230_400));
    }

    #[test]
    fn reshape_rounds_half_away_from_zero() {
        let m = Mat::from_fn(1, 3, |_, j| [254.6, 0.4, 128.0][j]);
        let f = FlatVideo::new(m, shape(1, 1, 3)).unwrap();
        let v = reshape(&f).unwrap();
        assert_eq!(v.data(), &[255, 0, 128]);
        let m = Mat::from_fn(1, 2, |_, j| [0.5, 2.5][j]);
        let v = reshape(&FlatVideo::new(m, shape(2, 1, 1)).unwrap()).unwrap();
        assert_eq!(v.data(), &[1, 3]);
    }

    #[test]
    fn reshape_rejects_inconsistent_tag() {
        let m = Mat::<f64>::zeros(2, 5);
        assert!(matches!(FlatVideo::new(m, shape(1, 1, 3)), Err(DprpError::ShapeMismatch(_))));
    }

    #[test]
    fn random_integer_matrix_round_trips() {
        use rand::Rng;
        let mut rng = crate::rng::stream("test", 3);
        for _ in 0..100 {
            let m = Mat::from_fn(2, 12, |_, _| f64::from(rng.random::<u8>()));
            let f = FlatVideo::new(m.clone(), shape(2, 2, 3)).unwrap();
            let back = flatten(&reshape(&f).unwrap());
            assert_eq!(back.values(), &m);
        }
    }

    #[test]
    fn clamping() {
        let m = Mat::from_fn(1, 3, |_, j| [-3.2, 12.0, 300.0][j]);
        let c = clamp_pixels(&FlatVideo::new(m, shape(1, 1, 3)).unwrap());
        assert_eq!([c.get(0, 0), c.get(0, 1), c.get(0, 2)], [0.0, 12.0, 255.0]);

        let m = Mat::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 20.0);
        let f = FlatVideo::new(m, shape(4, 1, 1)).unwrap();
        assert_eq!(clamp_pixels(&f), f);

        let m = Mat::from_fn(2, 3, |_, _| 127.5);
        let f = FlatVideo::new(m, shape(1, 1, 3)).unwrap();
        assert_eq!(clamp_pixels(&f), f);
    }

    #[test]
    fn invalid_tensors_are_rejected() {
        assert!(matches!(FrameShape::new(2, 2, 2), Err(DprpError::UnsupportedChannelCount(2))));
        assert!(VideoTensor::new(1, shape(2, 2, 1), vec![0; 3]).is_err());
        assert!(VideoTensor::new(0, shape(2, 2, 1), vec![]).is_err());
    }

    #[test]
    fn pixel_indexing_matches_layout() {
        let v = VideoTensor::from_fn(2, shape(3, 2, 3), |t, x, y, c| (t * 100 + y * 30 + x * 3 + c) as u8).unwrap();
        assert_eq!(v.pixel(1, 2, 1, 2), 100 + 30 + 6 + 2);
        let f = flatten(&v);
        // row t, column (y·w + x)·c + ch
        assert_eq!(f.get(1, (3 + 2) * 3 + 2), f64::from(v.pixel(1, 2, 1, 2)));
    }

    fn arb_video() -> impl Strategy<Value = VideoTensor> {
        (1usize..5, 1u32..6, 1u32..6, prop::bool::ANY).prop_flat_map(|(t, w, h, rgb)| {
            let c = if rgb { 3 } else { 1 };
            let n = t * (w * h * c) as usize;
            prop::collection::vec(any::<u8>(), n)
                .prop_map(move |data| VideoTensor::new(t, shape(w, h, c), data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn reshape_inverts_flatten(v in arb_video()) {
            prop_assert_eq!(reshape(&flatten(&v)).unwrap(), v);
        }

        #[test]
        fn flatten_preserves_energy(v in arb_video()) {
            let pixel_energy: f64 = v.data().iter().map(|&p| f64::from(p).powi(2)).sum();
            let f = flatten(&v);
            let flat_energy: f64 = (0..f.rows())
                .flat_map(|i| (0..f.cols()).map(move |j| (i, j)))
                .map(|(i, j)| f.get(i, j).powi(2))
                .sum();
            prop_assert_eq!(pixel_energy, flat_energy);
        }
    }
}
