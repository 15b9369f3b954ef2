use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Grayscale frames, one per row of `pixels` (`H * W` columns, row-major),
/// intensities nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub height: usize,
    pub width: usize,
    pub pixels: Matrix,
}

impl FrameStack {
    pub fn new(height: usize, width: usize, pixels: Matrix) -> Result<Self> {
        if height == 0 || width == 0 || pixels.cols() != height * width {
            return Err(Error::Dimension(format!(
                "{} pixel columns for {height}x{width} frames",
                pixels.cols()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn len(&self) -> usize {
        self.pixels.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.rows() == 0
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        self.pixels.row(i)
    }

    /// Frames `idx` in order; indices are clamped into range.
    pub fn select(&self, idx: &[isize]) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("cannot select from an empty frame stack".into()));
        }
        let last = self.len() as isize - 1;
        let rows: Vec<Vec<f32>> = idx
            .iter()
            .map(|i| self.frame((*i).clamp(0, last) as usize).to_vec())
            .collect();
        let pixels = if rows.is_empty() {
            Matrix::zeros(0, self.height * self.width)
        } else {
            Matrix::from_rows(&rows)?
        };
        Ok(Self { pixels, ..*self })
    }

    pub fn flip_horizontal(&self) -> Self {
        self.map_frames(self.height, self.width, |f, r, c| f[r * self.width + (self.width - 1 - c)])
    }

    pub fn flip_vertical(&self) -> Self {
        self.map_frames(self.height, self.width, |f, r, c| f[(self.height - 1 - r) * self.width + c])
    }

    /// Rotation by `k` quarter turns counter-clockwise; odd `k` swaps height and width.
    pub fn rotate90(&self, k: u32) -> Self {
        let (h, w) = (self.height, self.width);
        match k % 4 {
            0 => self.clone(),
            1 => self.map_frames(w, h, |f, r, c| f[c * w + (w - 1 - r)]),
            2 => self.map_frames(h, w, |f, r, c| f[(h - 1 - r) * w + (w - 1 - c)]),
            _ => self.map_frames(w, h, |f, r, c| f[(h - 1 - c) * w + r]),
        }
    }

    fn map_frames(&self, oh: usize, ow: usize, src: impl Fn(&[f32], usize, usize) -> f32) -> Self {
        let mut pixels = Matrix::zeros(self.len(), oh * ow);
        for i in 0..self.len() {
            let f = self.frame(i);
            let out = pixels.row_mut(i);
            for r in 0..oh {
                for c in 0..ow {
                    out[r * ow + c] = src(f, r, c);
                }
            }
        }
        Self {
            height: oh,
            width: ow,
            pixels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack() -> FrameStack {
        // one 2x3 frame: 0 1 2 / 3 4 5
        FrameStack::new(2, 3, Matrix::from_vec(1, 6, (0..6).map(|v| v as f32).collect()).unwrap()).unwrap()
    }

    #[test]
    fn flips_are_involutions() {
        let s = stack();
        assert_eq!(s.flip_horizontal().frame(0), &[2.0, 1.0, 0.0, 5.0, 4.0, 3.0]);
        assert_eq!(s.flip_vertical().frame(0), &[3.0, 4.0, 5.0, 0.0, 1.0, 2.0]);
        assert_eq!(s.flip_horizontal().flip_horizontal(), s);
        assert_eq!(s.flip_vertical().flip_vertical(), s);
    }

    #[test]
    fn quarter_turns_compose() {
        let s = stack();
        let r1 = s.rotate90(1);
        assert_eq!((r1.height, r1.width), (3, 2));
        // counter-clockwise: top row becomes the right column read upward
        assert_eq!(r1.frame(0), &[2.0, 5.0, 1.0, 4.0, 0.0, 3.0]);
        assert_eq!(s.rotate90(1).rotate90(1), s.rotate90(2));
        assert_eq!(s.rotate90(3).rotate90(1), s);
        assert_eq!(s.rotate90(2), s.flip_horizontal().flip_vertical());
    }

    #[test]
    fn shape_is_checked() {
        assert!(FrameStack::new(2, 2, Matrix::zeros(1, 5)).is_err());
    }
}
