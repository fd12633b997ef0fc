use std::sync::atomic::{AtomicU32, Ordering};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F = f32> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Copy + Default> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::default(); rows * cols],
        }
    }
}

impl<F> Matrix<F> {
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data does not match {rows}x{cols}");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[F]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// `f32` matrix shared between training workers without locking.
///
/// Reads and writes are relaxed atomic loads and stores. A read-modify-write
/// of an element is not atomic as a whole, so concurrent updates of the same
/// row can be lost; asynchronous SGD tolerates that.
pub(crate) struct AtomicMatrix {
    cols: usize,
    data: Vec<AtomicU32>,
}

impl AtomicMatrix {
    pub(crate) fn from_matrix(m: Matrix<f32>) -> Self {
        AtomicMatrix {
            cols: m.cols,
            data: m.data.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
        }
    }

    pub(crate) fn into_matrix(self) -> Matrix<f32> {
        let rows = self.data.len().checked_div(self.cols).unwrap_or(0);
        let data = self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect();
        Matrix::from_vec(rows, self.cols, data)
    }

    fn row(&self, r: usize) -> &[AtomicU32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Row access used by the update kernel, over either plain or shared storage.
pub(crate) trait RowStore {
    fn read(&self, row: usize, out: &mut [f32]);
    /// `row += a * x`
    fn axpy(&mut self, row: usize, a: f32, x: &[f32]);
}

impl RowStore for Matrix<f32> {
    #[inline]
    fn read(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(self.row(row));
    }

    #[inline]
    fn axpy(&mut self, row: usize, a: f32, x: &[f32]) {
        for (r, &v) in self.row_mut(row).iter_mut().zip(x) {
            *r += a * v;
        }
    }
}

impl RowStore for &AtomicMatrix {
    #[inline]
    fn read(&self, row: usize, out: &mut [f32]) {
        for (o, a) in out.iter_mut().zip(self.row(row)) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn axpy(&mut self, row: usize, a: f32, x: &[f32]) {
        for (cell, &v) in self.row(row).iter().zip(x) {
            let cur = f32::from_bits(cell.load(Ordering::Relaxed));
            cell.store((cur + a * v).to_bits(), Ordering::Relaxed);
        }
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f32>() + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_round_trip_and_axpy() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let shared = AtomicMatrix::from_matrix(m.clone());
        let mut handle = &shared;
        handle.axpy(1, 2.0, &[1.0, 0.0, -1.0]);
        let mut buf = [0.0; 3];
        handle.read(1, &mut buf);
        assert_eq!(buf, [6.0, 5.0, 4.0]);
        let back = shared.into_matrix();
        assert_eq!(back.row(0), m.row(0));
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f32> = (0..19).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..19).map(|i| 1.0 - i as f32 * 0.25).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
        assert!((dot(&a, &b) as f64 - naive).abs() < 1e-4);
    }
}
