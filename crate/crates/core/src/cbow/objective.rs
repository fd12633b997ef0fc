//! The negative-sampling CBOW objective.
//!
//! For hidden layer `h` (mean of the context input vectors), target output
//! vector `v'_t` and negative output vectors `v'_j`:
//!
//! ```text
//! L = -log σ(v'_t · h) - Σ_j log σ(-v'_j · h)
//! ```
//!
//! [`ns_gradients`] evaluates `L` and its exact gradient at any float
//! precision; [`cbow_update`] applies the matching SGD step to `f32` storage.

use num_traits::Float;

use super::matrix::{dot, RowStore};
use super::Matrix;

#[inline]
pub fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus<F: Float>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// Loss and gradients of one averaged-context negative-sampling update.
#[derive(Debug, Clone)]
pub struct NsGradients<F> {
    pub loss: F,
    /// `∂L/∂v` for every input row (zero for rows outside the context).
    pub input: Matrix<F>,
    /// `∂L/∂v'` for every output row.
    pub output: Matrix<F>,
}

/// Exact loss and gradients with respect to both matrices.
///
/// Repeated context or negative ids contribute once per occurrence.
///
/// # Panics
/// If `context` is empty or an id is out of range.
pub fn ns_gradients<F: Float + Default>(
    input: &Matrix<F>,
    output: &Matrix<F>,
    target: usize,
    context: &[usize],
    negatives: &[usize],
) -> NsGradients<F> {
    assert!(!context.is_empty(), "context must be nonempty");
    let n = input.cols();
    let cw = F::from(context.len()).unwrap();

    let mut h = vec![F::zero(); n];
    for &c in context {
        for (acc, &x) in h.iter_mut().zip(input.row(c)) {
            *acc = *acc + x;
        }
    }
    h.iter_mut().for_each(|x| *x = *x / cw);

    let mut d_input = Matrix::zeros(input.rows(), n);
    let mut d_output = Matrix::zeros(output.rows(), n);
    let mut d_h = vec![F::zero(); n];
    let mut loss = F::zero();

    let terms = std::iter::once((target, true)).chain(negatives.iter().map(|&j| (j, false)));
    for (row, positive) in terms {
        let v = output.row(row);
        let u = v.iter().zip(&h).fold(F::zero(), |s, (&a, &b)| s + a * b);
        // dL/du: σ(u) - 1 for the target, σ(u) for a negative.
        let du = if positive {
            loss = loss + softplus(-u);
            sigmoid(u) - F::one()
        } else {
            loss = loss + softplus(u);
            sigmoid(u)
        };
        for i in 0..n {
            d_h[i] = d_h[i] + du * v[i];
        }
        for (g, &hi) in d_output.row_mut(row).iter_mut().zip(&h) {
            *g = *g + du * hi;
        }
    }
    for &c in context {
        for (g, &dh) in d_input.row_mut(c).iter_mut().zip(&d_h) {
            *g = *g + dh / cw;
        }
    }
    NsGradients {
        loss,
        input: d_input,
        output: d_output,
    }
}

/// Reusable buffers for [`cbow_update`].
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    h: Vec<f32>,
    grad_h: Vec<f32>,
    row: Vec<f32>,
}

impl Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Scratch {
            h: vec![0.0; dim],
            grad_h: vec![0.0; dim],
            row: vec![0.0; dim],
        }
    }
}

/// One SGD step of the averaged-context objective with learning rate `alpha`.
/// Returns the loss before the step. `context` must be nonempty.
pub(crate) fn cbow_update<I: RowStore, O: RowStore>(
    input: &mut I,
    output: &mut O,
    target: u32,
    context: &[u32],
    negatives: &[u32],
    alpha: f32,
    s: &mut Scratch,
) -> f32 {
    debug_assert!(!context.is_empty());
    s.h.iter_mut().for_each(|x| *x = 0.0);
    for &c in context {
        input.read(c as usize, &mut s.row);
        for (acc, &x) in s.h.iter_mut().zip(&s.row) {
            *acc += x;
        }
    }
    let inv = 1.0 / context.len() as f32;
    s.h.iter_mut().for_each(|x| *x *= inv);
    s.grad_h.iter_mut().for_each(|x| *x = 0.0);

    let mut loss = 0.0;
    let terms = std::iter::once((target, 1.0f32)).chain(negatives.iter().map(|&j| (j, 0.0)));
    for (row, label) in terms {
        output.read(row as usize, &mut s.row);
        let u = dot(&s.h, &s.row);
        loss += if label > 0.0 { softplus(-u) } else { softplus(u) };
        // g = -alpha * dL/du
        let g = (label - sigmoid(u)) * alpha;
        for (acc, &v) in s.grad_h.iter_mut().zip(&s.row) {
            *acc += g * v;
        }
        output.axpy(row as usize, g, &s.h);
    }
    for &c in context {
        input.axpy(c as usize, inv, &s.grad_h);
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!(softplus(-1000.0f64) >= 0.0 && softplus(-1000.0f64) < 1e-300);
        assert!((sigmoid(0.0f32) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn two_word_loss_without_negatives() {
        // h = v_a = (0.3, 0.4), v'_b = (0.6, 0.8): u = 0.5
        let input = Matrix::from_vec(2, 2, vec![0.3, 0.4, 0.0, 0.0]);
        let output = Matrix::from_vec(2, 2, vec![0.0, 0.0, 0.6, 0.8]);
        let g = ns_gradients::<f64>(&input, &output, 1, &[0], &[]);
        let expected = -(1.0 / (1.0 + (-0.5f64).exp())).ln();
        assert!((g.loss - expected).abs() < 1e-15);
    }
}
